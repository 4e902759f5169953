#include "fastturn/engine.hpp"

#include <cmath>

#include "fastturn/fusion/fusion.hpp"
#include "fastturn/nn/kernels.hpp"

namespace fastturn {

using nn::Tensor;

EngineMode engine_mode_from_string(const std::string& s) {
    if (s == "cascaded") return EngineMode::Cascaded;
    if (s == "semantic") return EngineMode::Semantic;
    if (s == "unified") return EngineMode::Unified;
    throw ConfigError("unknown engine mode: \"" + s + "\" (expected cascaded|semantic|unified)");
}

const char* to_string(EngineMode m) {
    switch (m) {
        case EngineMode::Cascaded: return "cascaded";
        case EngineMode::Semantic: return "semantic";
        case EngineMode::Unified: return "unified";
    }
    return "?";
}

Engine Engine::init(EngineConfig cfg) {
    cfg.validate();
    Engine e{std::move(cfg), lm::Vocab(1), {}};
    e.vocab = lm::Vocab(e.cfg.content_tokens());
    nn::Rng root(e.cfg.training.seed);

    enc::init_encoder_params(e.params, e.cfg.encoder, root.fork("init/encoder"));
    {
        // CTC head: model_dim -> blank + content
        nn::Rng rng = root.fork("init/ctc_head");
        const int d = e.cfg.encoder.model_dim;
        const int v1 = e.cfg.content_tokens() + 1;
        const double limit = std::sqrt(6.0 / (d + v1));
        Tensor w = Tensor::zeros({d, v1});
        for (double& x : w.v) x = rng.uniform(-limit, limit);
        e.params.insert("ctc_head.w", std::move(w));
        e.params.insert("ctc_head.b", Tensor::zeros({v1}));
    }
    lm::init_lm_params(e.params, e.cfg.lm, root.fork("init/lm"));
    lm::init_llm_adapter_params(e.params, e.cfg.llm_adapter, e.cfg.encoder.model_dim, e.cfg.lm.model_dim,
                                root.fork("init/llm_adapter"));
    fusion::init_acoustic_adapter_params(e.params, e.cfg.acoustic_adapter, e.cfg.encoder.model_dim,
                                         root.fork("init/acoustic_adapter"));
    fusion::init_detector_params(e.params, e.cfg.detector, e.fusion_dim(), root.fork("init/detector"));
    return e;
}

Engine Engine::with_params(EngineConfig cfg, nn::ParameterSet params) {
    cfg.validate();
    Engine e{std::move(cfg), lm::Vocab(1), std::move(params)};
    e.vocab = lm::Vocab(e.cfg.content_tokens());
    return e;
}

Engine::Encoded Engine::encode(const data::FeatureMatrix& feats) const {
    nn::Tape t;
    nn::ParamVars pv(t, params, false);
    enc::EncoderTaps taps = enc::encoder_forward(t, pv, cfg.encoder, feats);
    return {t.val(taps.top), t.val(taps.mid)};
}

Tensor Engine::ctc_log_probs(const Tensor& top) const {
    const Tensor& w = params.at("ctc_head.w");
    const Tensor& b = params.at("ctc_head.b");
    const int T = top.rows();
    const int v1 = w.shape[1];
    Tensor logits = Tensor::zeros({T, v1});
    if (T > 0) nn::kernels::matmul(logits.v.data(), top.v.data(), w.v.data(), T, top.cols(), v1);
    for (int i = 0; i < T; ++i) {
        double* r = logits.row(i);
        for (int j = 0; j < v1; ++j) r[j] += b.v[static_cast<std::size_t>(j)];
    }
    Tensor lp = Tensor::zeros({T, v1});
    if (T > 0) nn::kernels::log_softmax_rows(lp.v.data(), logits.v.data(), T, v1);
    return lp;
}

std::vector<int> Engine::greedy_transcript(const Tensor& top) const {
    const Tensor lp = ctc_log_probs(top);
    ctc::GreedyState st;
    for (int i = 0; i < lp.rows(); ++i) ctc::greedy_step(st, lp.row(i), lp.cols());
    return st.transcript;
}

Tensor Engine::llm_prefix(const Tensor& top) const {
    return lm::adapt_acoustic(params, cfg.llm_adapter, cfg.lm.model_dim, top);
}

lm::TurnPrediction Engine::predict(const std::vector<int>& prompt, const Tensor* prefix) const {
    return lm::predict_turn(params, cfg.lm, vocab, prompt, prefix);
}

Tensor Engine::acoustic_vec(const Tensor& mid) const {
    if (mid.rows() < 1) return Tensor::zeros({1, cfg.acoustic_adapter.model_dim});
    return fusion::acoustic_adapt(params, cfg.acoustic_adapter, mid);
}

std::array<double, 4> Engine::detect(const Tensor& acoustic, const Tensor& lm_hidden) const {
    return fusion::detect_turn(params, acoustic, lm_hidden);
}

std::vector<int> Engine::decode_asr(const Tensor& prefix, int max_len) const {
    return lm::lm_decode_asr(params, cfg.lm, vocab, prefix, max_len);
}

Decision decide(const Engine& eng, EngineMode mode, const Tensor& top, const Tensor& mid,
                const std::vector<int>& transcript) {
    const std::vector<int> prompt = ctc::format_ctc_prompt(transcript, eng.vocab);
    Decision d;
    if (mode == EngineMode::Cascaded) {
        lm::TurnPrediction p = eng.predict(prompt, nullptr);
        d.state = p.state;
        d.confidence = p.confidence;
        for (int i = 0; i < 4; ++i)
            d.probs[static_cast<std::size_t>(i)] = std::exp(p.turn_logprobs[static_cast<std::size_t>(i)]);
        return d;
    }
    const Tensor prefix = eng.llm_prefix(top);
    lm::TurnPrediction p = eng.predict(prompt, &prefix);
    if (mode == EngineMode::Semantic) {
        d.state = p.state;
        d.confidence = p.confidence;
        for (int i = 0; i < 4; ++i)
            d.probs[static_cast<std::size_t>(i)] = std::exp(p.turn_logprobs[static_cast<std::size_t>(i)]);
        return d;
    }
    // Unified: fusion detector is the deciding head
    const Tensor acoustic = eng.acoustic_vec(mid);
    d.probs = eng.detect(acoustic, p.final_hidden);
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (d.probs[static_cast<std::size_t>(i)] > d.probs[static_cast<std::size_t>(best)]) best = i;
    d.state = static_cast<data::TurnState>(best);
    d.confidence = d.probs[static_cast<std::size_t>(best)];
    return d;
}

} // namespace fastturn
