#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fastturn/data/turn_state.hpp"
#include "fastturn/lm/vocab.hpp"
#include "fastturn/nn/params.hpp"
#include "fastturn/nn/rng.hpp"
#include "fastturn/nn/tape.hpp"
#include "fastturn/nn/transformer.hpp"

namespace fastturn::lm {

// Tiny decoder-only LM with learned relative-position attention bias. The
// acoustic prefix, when present, occupies the leading positions; prompt
// tokens follow.
struct LmConfig {
    int num_layers = 3;
    int num_heads = 4;
    int model_dim = 64;
    int max_positions = 256;
    int max_rel_dist = 24;
    int vocab_size = 0; // filled in from the vocabulary

    void validate() const;
    nn::TransformerDims dims() const { return {num_layers, num_heads, model_dim, 2, true, max_rel_dist}; }
};

// LLM adapter: encoder hidden states -> LM input space, sequence to sequence.
struct LlmAdapterConfig {
    int num_layers = 4;
    int num_heads = 4;
    int ffn_mult = 2;
};

void init_lm_params(nn::ParameterSet& ps, const LmConfig& cfg, nn::Rng rng);
void init_llm_adapter_params(nn::ParameterSet& ps, const LlmAdapterConfig& cfg, int encoder_dim,
                             int lm_dim, nn::Rng rng);

struct LmNodes {
    nn::Var logits;       // [n, vocab]
    nn::Var final_hidden; // [1, model_dim]
};

// Differentiable forward over [prefix || embedded tokens]. Total positions
// must be >= 1 and <= max_positions.
LmNodes lm_forward_node(nn::Tape& t, nn::ParamVars& pv, const LmConfig& cfg,
                        const std::vector<int>& tokens, std::optional<nn::Var> prefix);

// LLM adapter node: top_hidden [T, enc_dim] -> [T, lm_dim]; length preserving.
nn::Var adapt_acoustic_node(nn::Tape& t, nn::ParamVars& pv, const LlmAdapterConfig& cfg, int lm_dim,
                            nn::Var top_hidden);

// --- inference wrappers (no gradients) ---

struct LmOut {
    nn::Tensor logits;
    nn::Tensor final_hidden;
};

LmOut lm_forward(const nn::ParameterSet& ps, const LmConfig& cfg, const std::vector<int>& tokens,
                 const nn::Tensor* prefix);

nn::Tensor adapt_acoustic(const nn::ParameterSet& ps, const LlmAdapterConfig& cfg, int lm_dim,
                          const nn::Tensor& top_hidden);

struct TurnPrediction {
    data::TurnState state = data::TurnState::Complete;
    double confidence = 0.0;                 // winning probability among the 4 turn tokens
    std::array<double, 4> turn_logprobs{};   // log-softmax restricted to the turn tokens
    nn::Tensor final_hidden;                 // [1, model_dim], feeds the fusion path
};

// prompt must be empty or marker-balanced; empty prompt with no prefix falls
// back to a lone <bos> so a degenerate input still yields a valid state.
TurnPrediction predict_turn(const nn::ParameterSet& ps, const LmConfig& cfg, const Vocab& vocab,
                            const std::vector<int>& prompt, const nn::Tensor* prefix);

void validate_prompt(const std::vector<int>& prompt, const Vocab& vocab);

// Greedy autoregressive decode from <bos> until <eos> or max_len, conditioned
// on the acoustic prefix; returns CTC-space content ids (non-content
// emissions map to distinct negative ids so error rates count them).
std::vector<int> lm_decode_asr(const nn::ParameterSet& ps, const LmConfig& cfg, const Vocab& vocab,
                               const nn::Tensor& prefix, int max_len);

} // namespace fastturn::lm
