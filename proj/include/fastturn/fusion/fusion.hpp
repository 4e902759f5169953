#pragma once

#include <array>

#include "fastturn/nn/params.hpp"
#include "fastturn/nn/rng.hpp"
#include "fastturn/nn/tape.hpp"
#include "fastturn/nn/transformer.hpp"

namespace fastturn::fusion {

// Acoustic adapter: transformer over the encoder's mid-layer states, mean
// pooled to one vector. Position-free by default so pooling is order-robust;
// the causal mask still gives it ordering when positional is enabled later.
struct AcousticAdapterConfig {
    int num_layers = 4;
    int num_heads = 4;
    int model_dim = 64;
    int ffn_mult = 2;
};

// 3-layer MLP over [acoustic vector || LM hidden vector] -> 4 turn logits.
struct DetectorConfig {
    int hidden1 = 128;
    int hidden2 = 64;
};

void init_acoustic_adapter_params(nn::ParameterSet& ps, const AcousticAdapterConfig& cfg,
                                  int encoder_dim, nn::Rng rng);
void init_detector_params(nn::ParameterSet& ps, const DetectorConfig& cfg, int fusion_dim, nn::Rng rng);

// mid_hidden [T>=1, enc_dim] -> [1, model_dim]
nn::Var acoustic_adapt_node(nn::Tape& t, nn::ParamVars& pv, const AcousticAdapterConfig& cfg,
                            nn::Var mid_hidden);
nn::Tensor acoustic_adapt(const nn::ParameterSet& ps, const AcousticAdapterConfig& cfg,
                          const nn::Tensor& mid_hidden);

// [1, fusion_dim] -> [1, 4] logits (Complete, Incomplete, Backchannel, Wait)
nn::Var detector_logits_node(nn::Tape& t, nn::ParamVars& pv, nn::Var acoustic_vec, nn::Var lm_hidden);

// softmax probabilities over the four states; sums to 1 within 1e-12
std::array<double, 4> detect_turn(const nn::ParameterSet& ps, const nn::Tensor& acoustic_vec,
                                  const nn::Tensor& lm_hidden);

} // namespace fastturn::fusion
