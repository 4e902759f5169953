#include "fastturn/lm/lm.hpp"

#include <cmath>
#include <stdexcept>

#include "fastturn/common.hpp"
#include "fastturn/nn/kernels.hpp"

namespace fastturn::lm {

using nn::Tensor;
using nn::Var;

void LmConfig::validate() const {
    if (num_layers < 1) throw ConfigError("lm: num_layers must be >= 1");
    if (num_heads < 1 || model_dim % num_heads != 0)
        throw ConfigError("lm: model_dim must be divisible by num_heads");
    if (max_positions < 2) throw ConfigError("lm: max_positions must be >= 2");
}

void init_lm_params(nn::ParameterSet& ps, const LmConfig& cfg, nn::Rng rng) {
    cfg.validate();
    if (cfg.vocab_size < 1) throw ConfigError("lm: vocab_size not set");
    Tensor emb = Tensor::zeros({cfg.vocab_size, cfg.model_dim});
    for (double& x : emb.v) x = rng.uniform(-0.08, 0.08);
    ps.insert("lm.emb", std::move(emb));
    init_transformer_params(ps, "lm.", cfg.dims(), rng);
    const double limit = std::sqrt(6.0 / (cfg.model_dim + cfg.vocab_size));
    Tensor head = Tensor::zeros({cfg.model_dim, cfg.vocab_size});
    for (double& x : head.v) x = rng.uniform(-limit, limit);
    ps.insert("lm.head.w", std::move(head));
    ps.insert("lm.head.b", Tensor::zeros({cfg.vocab_size}));
}

void init_llm_adapter_params(nn::ParameterSet& ps, const LlmAdapterConfig& cfg, int encoder_dim,
                             int lm_dim, nn::Rng rng) {
    const double limit = std::sqrt(6.0 / (encoder_dim + lm_dim));
    Tensor w = Tensor::zeros({encoder_dim, lm_dim});
    for (double& x : w.v) x = rng.uniform(-limit, limit);
    ps.insert("llm_adapter.in.w", std::move(w));
    ps.insert("llm_adapter.in.b", Tensor::zeros({lm_dim}));
    nn::TransformerDims dims{cfg.num_layers, cfg.num_heads, lm_dim, cfg.ffn_mult};
    init_transformer_params(ps, "llm_adapter.", dims, rng);
}

LmNodes lm_forward_node(nn::Tape& t, nn::ParamVars& pv, const LmConfig& cfg,
                        const std::vector<int>& tokens, std::optional<Var> prefix) {
    const int n_prefix = prefix ? t.val(*prefix).shape[0] : 0;
    const int n = n_prefix + static_cast<int>(tokens.size());
    if (n < 1) throw std::invalid_argument("lm_forward: empty input");
    if (n > cfg.max_positions)
        throw std::invalid_argument("lm_forward: position overflow (" + std::to_string(n) + " > " +
                                    std::to_string(cfg.max_positions) + ")");

    Var x;
    if (!tokens.empty()) {
        Var emb = t.embedding_rows(pv("lm.emb"), tokens);
        x = prefix ? t.concat_rows({*prefix, emb}) : emb;
    } else {
        x = *prefix;
    }
    x = nn::transformer_forward(t, pv, "lm.", cfg.dims(), x);

    LmNodes out;
    out.logits = nn::affine(t, x, pv("lm.head.w"), pv("lm.head.b"));
    out.final_hidden = t.slice_rows(x, n - 1, 1);
    return out;
}

Var adapt_acoustic_node(nn::Tape& t, nn::ParamVars& pv, const LlmAdapterConfig& cfg, int lm_dim,
                        Var top_hidden) {
    Var x = nn::affine(t, top_hidden, pv("llm_adapter.in.w"), pv("llm_adapter.in.b"));
    nn::TransformerDims dims{cfg.num_layers, cfg.num_heads, lm_dim, cfg.ffn_mult};
    return nn::transformer_forward(t, pv, "llm_adapter.", dims, x);
}

LmOut lm_forward(const nn::ParameterSet& ps, const LmConfig& cfg, const std::vector<int>& tokens,
                 const Tensor* prefix) {
    nn::Tape t;
    nn::ParamVars pv(t, ps, false);
    std::optional<Var> pre;
    if (prefix && prefix->rows() > 0) pre = t.leaf(*prefix);
    LmNodes nodes = lm_forward_node(t, pv, cfg, tokens, pre);
    return {t.val(nodes.logits), t.val(nodes.final_hidden)};
}

Tensor adapt_acoustic(const nn::ParameterSet& ps, const LlmAdapterConfig& cfg, int lm_dim,
                      const Tensor& top_hidden) {
    nn::Tape t;
    nn::ParamVars pv(t, ps, false);
    return t.val(adapt_acoustic_node(t, pv, cfg, lm_dim, t.leaf(top_hidden)));
}

void validate_prompt(const std::vector<int>& prompt, const Vocab& vocab) {
    if (prompt.empty()) return;
    if (prompt.size() < 2 || prompt.front() != vocab.ctc_open() || prompt.back() != vocab.ctc_close())
        throw std::invalid_argument("predict_turn: prompt markers unbalanced");
    for (std::size_t i = 1; i + 1 < prompt.size(); ++i)
        if (prompt[i] == vocab.ctc_open() || prompt[i] == vocab.ctc_close())
            throw std::invalid_argument("predict_turn: nested prompt marker");
}

TurnPrediction predict_turn(const nn::ParameterSet& ps, const LmConfig& cfg, const Vocab& vocab,
                            const std::vector<int>& prompt, const Tensor* prefix) {
    validate_prompt(prompt, vocab);
    std::vector<int> tokens = prompt;
    const bool have_prefix = prefix && prefix->rows() > 0;
    if (tokens.empty() && !have_prefix) tokens = {vocab.bos()}; // degenerate input tolerated

    LmOut out = lm_forward(ps, cfg, tokens, prefix);
    const int last = out.logits.rows() - 1;

    TurnPrediction pred;
    pred.final_hidden = out.final_hidden;
    // log-softmax restricted to the four turn tokens
    double mx = -1e300;
    for (int s = 0; s < 4; ++s) mx = std::max(mx, out.logits.at(last, vocab.first_turn_token() + s));
    double sum = 0.0;
    for (int s = 0; s < 4; ++s) sum += std::exp(out.logits.at(last, vocab.first_turn_token() + s) - mx);
    const double lse = mx + std::log(sum);
    int best = 0;
    for (int s = 0; s < 4; ++s) {
        pred.turn_logprobs[static_cast<std::size_t>(s)] =
            out.logits.at(last, vocab.first_turn_token() + s) - lse;
        if (pred.turn_logprobs[static_cast<std::size_t>(s)] > pred.turn_logprobs[static_cast<std::size_t>(best)])
            best = s;
    }
    pred.state = static_cast<data::TurnState>(best);
    pred.confidence = std::exp(pred.turn_logprobs[static_cast<std::size_t>(best)]);
    return pred;
}

std::vector<int> lm_decode_asr(const nn::ParameterSet& ps, const LmConfig& cfg, const Vocab& vocab,
                               const Tensor& prefix, int max_len) {
    if (prefix.rows() < 1) throw std::invalid_argument("lm_decode_asr: acoustic prefix required");
    std::vector<int> generated;
    std::vector<int> tokens = {vocab.bos()};
    for (int step = 0; step < max_len; ++step) {
        LmOut out = lm_forward(ps, cfg, tokens, &prefix);
        const int last = out.logits.rows() - 1;
        int best = 0;
        for (int v = 1; v < out.logits.cols(); ++v)
            if (out.logits.at(last, v) > out.logits.at(last, best)) best = v;
        if (best == vocab.eos()) break;
        tokens.push_back(best);
        if (best < vocab.content())
            generated.push_back(vocab.ctc_of_lm(best));
        else
            generated.push_back(-best - 1); // non-content emission, never matches a reference
    }
    return generated;
}

} // namespace fastturn::lm
