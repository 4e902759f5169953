#include "fastturn/pipeline/train.hpp"

#include <chrono>
#include <cmath>

#include "fastturn/ctc/ctc.hpp"
#include "fastturn/fusion/fusion.hpp"
#include "fastturn/lm/lm.hpp"

namespace fastturn::pipeline {

using data::Sample;
using nn::GradMap;
using nn::Tensor;
using nn::Var;

namespace {

double wall_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void accumulate(GradMap& acc, const GradMap& g) {
    for (const auto& [name, t] : g) {
        auto it = acc.find(name);
        if (it == acc.end())
            acc.emplace(name, t);
        else
            for (std::size_t i = 0; i < t.v.size(); ++i) it->second.v[i] += t.v[i];
    }
}

void scale_grads(GradMap& acc, double s) {
    for (auto& [name, t] : acc)
        for (double& x : t.v) x *= s;
}

// Deterministic shuffled index stream: a fresh permutation per epoch.
class IndexStream {
public:
    IndexStream(std::size_t n, nn::Rng rng) : n_(n), rng_(rng) { refill(); }

    std::size_t next() {
        if (pos_ >= perm_.size()) refill();
        return perm_[pos_++];
    }

private:
    void refill() {
        perm_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
        for (std::size_t i = n_; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(perm_[i - 1], perm_[j]);
        }
        pos_ = 0;
    }

    std::size_t n_;
    nn::Rng rng_;
    std::vector<std::size_t> perm_;
    std::size_t pos_ = 0;
};

// Per-sample loss builder: returns the scalar loss node on a fresh tape.
using LossFn = std::function<Var(nn::Tape&, nn::ParamVars&, std::size_t sample_idx, int step)>;

void train_loop(Engine& eng, const std::string& stage_id, const StageSchedule& sched, int batch_size,
                std::size_t corpus_size, nn::Rng order_rng, const LossFn& loss_fn, const LogSink& log) {
    eng.params.set_trainable_only(stage_trainable_prefixes(stage_id));
    nn::Adam opt;
    IndexStream stream(corpus_size, order_rng);
    for (int step = 1; step <= sched.total_steps; ++step) {
        GradMap acc;
        double loss_sum = 0.0;
        int used = 0;
        for (int b = 0; b < batch_size; ++b) {
            const std::size_t idx = stream.next();
            nn::Tape tape;
            nn::ParamVars pv(tape, eng.params, true);
            Var loss = loss_fn(tape, pv, idx, step);
            if (!loss.valid()) continue; // sample skipped (e.g. infeasible CTC length)
            loss_sum += tape.val(loss).v[0];
            tape.backward(loss);
            accumulate(acc, pv.collect_grads());
            ++used;
        }
        if (used == 0)
            throw TrainError("stage " + stage_id + ": no usable sample in batch at step " +
                             std::to_string(step));
        const double mean_loss = loss_sum / used;
        if (!std::isfinite(mean_loss))
            throw TrainError("stage " + stage_id + ": non-finite loss at step " + std::to_string(step));
        scale_grads(acc, 1.0 / used);
        const double lr = schedule_lr(sched, step);
        try {
            opt.step(eng.params, acc, lr);
        } catch (const std::invalid_argument& e) {
            throw TrainError("stage " + stage_id + ": step " + std::to_string(step) + ": " + e.what());
        }
        if (log) log({stage_id, step, mean_loss, lr, wall_ms()});
    }
}

std::vector<int> lm_ids(const lm::Vocab& vocab, const std::vector<int>& ctc_tokens) {
    std::vector<int> out;
    out.reserve(ctc_tokens.size());
    for (int t : ctc_tokens) out.push_back(vocab.lm_of_ctc(t));
    return out;
}

} // namespace

std::vector<std::string> stage_trainable_prefixes(const std::string& stage_id) {
    if (stage_id == "1a") return {"encoder.", "ctc_head."};
    if (stage_id == "1b") return {"lm."};
    if (stage_id == "2") return {"llm_adapter."};
    if (stage_id == "3") return {"lm.", "llm_adapter."};
    if (stage_id == "4") return {"acoustic_adapter.", "detector."};
    throw ConfigError("unknown stage id: " + stage_id);
}

void run_stage1a(Engine& eng, const std::vector<Sample>& corpus, const StageSchedule& sched,
                 int batch_size, std::uint64_t seed, const LogSink& log) {
    auto loss_fn = [&](nn::Tape& tape, nn::ParamVars& pv, std::size_t idx, int) -> Var {
        const Sample& s = corpus[idx];
        enc::EncoderTaps taps = enc::encoder_forward(tape, pv, eng.cfg.encoder, s.features);
        const int T = tape.val(taps.top).shape[0];
        if (T < ctc::min_frames(s.tokens) || T < 1) return Var{};
        Var logits = nn::affine(tape, taps.top, pv("ctc_head.w"), pv("ctc_head.b"));
        Var lp = tape.log_softmax_rows(logits);
        return ctc::ctc_loss_node(tape, lp, s.tokens);
    };
    train_loop(eng, "1a", sched, batch_size, corpus.size(), nn::Rng(seed).fork("stage1a/order"),
               loss_fn, log);
}

namespace {

struct TextSample {
    std::vector<int> tokens; // CTC-space content ids
    data::TurnState state;
    std::vector<int> reps;   // per-token duration in encoder output rows
};

// Fresh text-only sample from the corpus' token grammar: the turn state is a
// pure function of the token sequence, so unlimited balanced text data is
// available without touching any audio.
TextSample gen_text_sample(const data::SynthConfig& sc, int subsample, nn::Rng& rng) {
    TextSample out;
    out.state = static_cast<data::TurnState>(rng.uniform_int(0, 3));
    auto body = [&](int len) {
        int prev = -1;
        for (int i = 0; i < len; ++i) {
            int tok = static_cast<int>(rng.uniform_int(sc.regular_lo(), sc.regular_hi()));
            if (tok == prev && sc.regular_hi() > sc.regular_lo())
                tok = sc.regular_lo() + (tok - sc.regular_lo() + 1) % (sc.regular_hi() - sc.regular_lo() + 1);
            out.tokens.push_back(tok);
            prev = tok;
        }
    };
    switch (out.state) {
        case data::TurnState::Complete:
            body(static_cast<int>(rng.uniform_int(sc.body_len_min, sc.body_len_max)));
            out.tokens.push_back(sc.eot_token());
            break;
        case data::TurnState::Incomplete:
            body(static_cast<int>(rng.uniform_int(1, sc.body_len_max)));
            break;
        case data::TurnState::Backchannel: {
            const int len = static_cast<int>(rng.uniform_int(1, 3));
            int prev = -1;
            for (int i = 0; i < len; ++i) {
                int tok = static_cast<int>(rng.uniform_int(sc.backchannel_lo(), sc.backchannel_hi()));
                if (tok == prev && sc.backchannel_hi() > sc.backchannel_lo())
                    tok = sc.backchannel_lo() +
                          (tok - sc.backchannel_lo() + 1) % (sc.backchannel_hi() - sc.backchannel_lo() + 1);
                out.tokens.push_back(tok);
                prev = tok;
            }
            break;
        }
        case data::TurnState::Wait:
            body(static_cast<int>(rng.uniform_int(1, std::max(1, sc.body_len_max - 1))));
            out.tokens.push_back(sc.wait_token());
            break;
    }
    const int rep_lo = std::max(1, sc.frames_per_token_min / subsample);
    const int rep_hi = std::max(1, sc.frames_per_token_max / subsample);
    for (std::size_t i = 0; i < out.tokens.size(); ++i)
        out.reps.push_back(static_cast<int>(rng.uniform_int(rep_lo, rep_hi)));
    return out;
}

} // namespace

void run_stage1b(Engine& eng, const std::vector<Sample>& corpus, const StageSchedule& sched,
                 int batch_size, std::uint64_t seed, const LogSink& log) {
    // Text-only pretraining with the turn state as a trailing special token.
    // Every draw is a fresh sequence from the token grammar, contributing two
    // next-token patterns:
    //   (a) duration-stretched stream, <bos>, transcript, <eos> — the
    //       transcription skill the frozen LM must already have when stage 2
    //       trains the adapter against it;
    //   (b) <ctc>, transcript, </ctc>, turn token — the prompt-reading and
    //       turn-prediction pattern used at inference.
    // A pretrained LLM would bring (a) for free; a from-scratch LM has to be
    // taught it here.
    (void)corpus;
    const int sub = eng.cfg.encoder.subsampling_factor;
    nn::Rng gen = nn::Rng(seed).fork("stage1b/text");
    auto loss_fn = [&, sub](nn::Tape& tape, nn::ParamVars& pv, std::size_t, int) -> Var {
        const TextSample s = gen_text_sample(eng.cfg.synth, sub, gen);
        std::vector<int> seq_a;
        for (std::size_t i = 0; i < s.tokens.size(); ++i)
            for (int r = 0; r < s.reps[i]; ++r) seq_a.push_back(eng.vocab.lm_of_ctc(s.tokens[i]));
        seq_a.push_back(eng.vocab.bos());
        for (int t : s.tokens) seq_a.push_back(eng.vocab.lm_of_ctc(t));
        seq_a.push_back(eng.vocab.eos());
        std::vector<int> tgt_a(seq_a.begin() + 1, seq_a.end());
        seq_a.pop_back();
        lm::LmNodes a = lm::lm_forward_node(tape, pv, eng.cfg.lm, seq_a, std::nullopt);
        Var loss_a = tape.cross_entropy(a.logits, tgt_a);

        const std::vector<int> prompt = ctc::format_ctc_prompt(s.tokens, eng.vocab);
        lm::LmNodes b = lm::lm_forward_node(tape, pv, eng.cfg.lm, prompt, std::nullopt);
        std::vector<int> tgt_b(prompt.begin() + 1, prompt.end());
        tgt_b.push_back(eng.vocab.turn_token(s.state));
        Var loss_b = tape.cross_entropy(b.logits, tgt_b);

        return tape.scale(tape.add(loss_a, loss_b), 0.5);
    };
    train_loop(eng, "1b", sched, batch_size, corpus.size(), nn::Rng(seed).fork("stage1b/order"),
               loss_fn, log);
}

void run_stage1(Engine& eng, const std::vector<Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log) {
    run_stage1a(eng, corpus, cfg.stage1a, cfg.batch_size, cfg.seed, log);
    run_stage1b(eng, corpus, cfg.stage1b, cfg.batch_size, cfg.seed, log);
}

void run_stage2(Engine& eng, const std::vector<Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log) {
    // encoder is frozen in this stage: encode every sample once up front
    std::vector<Tensor> tops;
    tops.reserve(corpus.size());
    for (const Sample& s : corpus) tops.push_back(eng.encode(s.features).top);

    auto loss_fn = [&](nn::Tape& tape, nn::ParamVars& pv, std::size_t idx, int) -> Var {
        const Sample& s = corpus[idx];
        if (tops[idx].rows() < 1) return Var{};
        Var prefix = lm::adapt_acoustic_node(tape, pv, eng.cfg.llm_adapter, eng.cfg.lm.model_dim,
                                             tape.leaf(tops[idx]));
        std::vector<int> in_tokens = {eng.vocab.bos()};
        const std::vector<int> content = lm_ids(eng.vocab, s.tokens);
        in_tokens.insert(in_tokens.end(), content.begin(), content.end());
        std::vector<int> targets = content;
        targets.push_back(eng.vocab.eos());
        lm::LmNodes nodes = lm::lm_forward_node(tape, pv, eng.cfg.lm, in_tokens, prefix);
        const int n_prefix = tops[idx].rows();
        Var rows = tape.slice_rows(nodes.logits, n_prefix, static_cast<int>(targets.size()));
        return tape.cross_entropy(rows, targets);
    };
    train_loop(eng, "2", cfg.stage2, cfg.batch_size, corpus.size(), nn::Rng(cfg.seed).fork("stage2/order"),
               loss_fn, log);
}

void run_stage3(Engine& eng, const std::vector<Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log) {
    // encoder + CTC head frozen: precompute hidden states and transcripts
    std::vector<Tensor> tops;
    std::vector<std::vector<int>> prompts;
    tops.reserve(corpus.size());
    prompts.reserve(corpus.size());
    for (const Sample& s : corpus) {
        Engine::Encoded enc = eng.encode(s.features);
        prompts.push_back(ctc::format_ctc_prompt(eng.greedy_transcript(enc.top), eng.vocab));
        tops.push_back(std::move(enc.top));
    }
    nn::Rng dropout_rng = nn::Rng(cfg.seed).fork("stage3/dropout");

    auto loss_fn = [&](nn::Tape& tape, nn::ParamVars& pv, std::size_t idx, int) -> Var {
        const Sample& s = corpus[idx];
        const std::vector<int> prompt =
            apply_prompt_dropout(prompts[idx], cfg.prompt_dropout_p, dropout_rng, eng.vocab);
        std::optional<Var> prefix;
        if (tops[idx].rows() > 0)
            prefix = lm::adapt_acoustic_node(tape, pv, eng.cfg.llm_adapter, eng.cfg.lm.model_dim,
                                             tape.leaf(tops[idx]));
        lm::LmNodes nodes = lm::lm_forward_node(tape, pv, eng.cfg.lm, prompt, prefix);
        const int n = tape.val(nodes.logits).shape[0];
        Var last = tape.slice_rows(nodes.logits, n - 1, 1);
        return tape.cross_entropy(last, {eng.vocab.turn_token(s.turn_state)});
    };
    train_loop(eng, "3", cfg.stage3, cfg.batch_size, corpus.size(), nn::Rng(cfg.seed).fork("stage3/order"),
               loss_fn, log);
}

void run_stage4(Engine& eng, const std::vector<Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log) {
    // everything upstream of the fusion head is frozen: precompute the
    // mid-layer taps and the LM hidden state per sample
    std::vector<Tensor> mids;
    std::vector<Tensor> lm_hidden;
    mids.reserve(corpus.size());
    lm_hidden.reserve(corpus.size());
    for (const Sample& s : corpus) {
        Engine::Encoded enc = eng.encode(s.features);
        const std::vector<int> prompt = ctc::format_ctc_prompt(eng.greedy_transcript(enc.top), eng.vocab);
        const Tensor prefix = eng.llm_prefix(enc.top);
        lm::TurnPrediction p = eng.predict(prompt, prefix.rows() > 0 ? &prefix : nullptr);
        mids.push_back(std::move(enc.mid));
        lm_hidden.push_back(std::move(p.final_hidden));
    }

    // with probability kModalityDropout the LM branch is zeroed for a draw,
    // so the acoustic branch carries class signal on its own and the fused
    // head keeps working when the CTC/LM path fails
    constexpr double kModalityDropout = 0.25;
    nn::Rng moddrop_rng = nn::Rng(cfg.seed).fork("stage4/moddrop");

    auto loss_fn = [&](nn::Tape& tape, nn::ParamVars& pv, std::size_t idx, int) -> Var {
        const Sample& s = corpus[idx];
        Var acoustic;
        if (mids[idx].rows() > 0)
            acoustic = fusion::acoustic_adapt_node(tape, pv, eng.cfg.acoustic_adapter, tape.leaf(mids[idx]));
        else
            acoustic = tape.leaf(Tensor::zeros({1, eng.cfg.acoustic_adapter.model_dim}));
        const bool drop_lm = moddrop_rng.bernoulli(kModalityDropout);
        Var lmh = tape.leaf(drop_lm ? Tensor::zeros({1, eng.cfg.lm.model_dim}) : lm_hidden[idx]);
        Var logits = fusion::detector_logits_node(tape, pv, acoustic, lmh);
        return tape.cross_entropy(logits, {static_cast<int>(s.turn_state)});
    };
    train_loop(eng, "4", cfg.stage4, cfg.batch_size, corpus.size(), nn::Rng(cfg.seed).fork("stage4/order"),
               loss_fn, log);
}

void run_all_stages(Engine& eng, const std::vector<Sample>& corpus, const TrainConfig& cfg,
                    const LogSink& log) {
    run_stage1(eng, corpus, cfg, log);
    run_stage2(eng, corpus, cfg, log);
    run_stage3(eng, corpus, cfg, log);
    run_stage4(eng, corpus, cfg, log);
}

} // namespace fastturn::pipeline
