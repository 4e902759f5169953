#include "fastturn/fusion/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "fastturn/nn/kernels.hpp"

namespace fastturn::fusion {

using nn::Tensor;
using nn::Var;

namespace {

Tensor xavier(nn::Rng& rng, int fan_in, int fan_out, std::vector<int> shape) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

} // namespace

void init_acoustic_adapter_params(nn::ParameterSet& ps, const AcousticAdapterConfig& cfg,
                                  int encoder_dim, nn::Rng rng) {
    ps.insert("acoustic_adapter.in.w", xavier(rng, encoder_dim, cfg.model_dim, {encoder_dim, cfg.model_dim}));
    ps.insert("acoustic_adapter.in.b", Tensor::zeros({cfg.model_dim}));
    nn::TransformerDims dims{cfg.num_layers, cfg.num_heads, cfg.model_dim, cfg.ffn_mult};
    init_transformer_params(ps, "acoustic_adapter.", dims, rng);
}

void init_detector_params(nn::ParameterSet& ps, const DetectorConfig& cfg, int fusion_dim, nn::Rng rng) {
    ps.insert("detector.l1.w", xavier(rng, fusion_dim, cfg.hidden1, {fusion_dim, cfg.hidden1}));
    ps.insert("detector.l1.b", Tensor::zeros({cfg.hidden1}));
    ps.insert("detector.l2.w", xavier(rng, cfg.hidden1, cfg.hidden2, {cfg.hidden1, cfg.hidden2}));
    ps.insert("detector.l2.b", Tensor::zeros({cfg.hidden2}));
    ps.insert("detector.l3.w", xavier(rng, cfg.hidden2, 4, {cfg.hidden2, 4}));
    ps.insert("detector.l3.b", Tensor::zeros({4}));
}

Var acoustic_adapt_node(nn::Tape& t, nn::ParamVars& pv, const AcousticAdapterConfig& cfg,
                        Var mid_hidden) {
    if (t.val(mid_hidden).shape[0] < 1)
        throw std::invalid_argument("acoustic_adapt: empty sequence");
    Var x = nn::affine(t, mid_hidden, pv("acoustic_adapter.in.w"), pv("acoustic_adapter.in.b"));
    nn::TransformerDims dims{cfg.num_layers, cfg.num_heads, cfg.model_dim, cfg.ffn_mult};
    x = nn::transformer_forward(t, pv, "acoustic_adapter.", dims, x);
    return t.mean_rows(x);
}

Tensor acoustic_adapt(const nn::ParameterSet& ps, const AcousticAdapterConfig& cfg,
                      const Tensor& mid_hidden) {
    nn::Tape t;
    nn::ParamVars pv(t, ps, false);
    return t.val(acoustic_adapt_node(t, pv, cfg, t.leaf(mid_hidden)));
}

Var detector_logits_node(nn::Tape& t, nn::ParamVars& pv, Var acoustic_vec, Var lm_hidden) {
    Var x = t.concat_cols({acoustic_vec, lm_hidden});
    x = t.tanh_(nn::affine(t, x, pv("detector.l1.w"), pv("detector.l1.b")));
    x = t.tanh_(nn::affine(t, x, pv("detector.l2.w"), pv("detector.l2.b")));
    return nn::affine(t, x, pv("detector.l3.w"), pv("detector.l3.b"));
}

std::array<double, 4> detect_turn(const nn::ParameterSet& ps, const Tensor& acoustic_vec,
                                  const Tensor& lm_hidden) {
    nn::Tape t;
    nn::ParamVars pv(t, ps, false);
    Var logits = detector_logits_node(t, pv, t.leaf(acoustic_vec), t.leaf(lm_hidden));
    const Tensor& l = t.val(logits);
    std::array<double, 4> probs{};
    nn::kernels::softmax_row(probs.data(), l.v.data(), 4);
    return probs;
}

} // namespace fastturn::fusion
