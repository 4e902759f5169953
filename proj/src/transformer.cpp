#include "fastturn/nn/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fastturn::nn {

namespace {

Tensor xavier(Rng& rng, int fan_in, int fan_out, std::vector<int> shape) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

Tensor ones(int n) {
    Tensor t = Tensor::zeros({n});
    for (double& x : t.v) x = 1.0;
    return t;
}

} // namespace

void init_transformer_params(ParameterSet& ps, const std::string& prefix, const TransformerDims& dims,
                             Rng& rng) {
    if (dims.model_dim % dims.num_heads != 0)
        throw std::invalid_argument("transformer: model_dim must be divisible by num_heads");
    const int d = dims.model_dim;
    const int f = dims.ffn_mult * d;
    for (int i = 0; i < dims.num_layers; ++i) {
        const std::string p = prefix + "block" + std::to_string(i) + ".";
        ps.insert(p + "ln1.g", ones(d));
        ps.insert(p + "ln1.b", Tensor::zeros({d}));
        for (const char* w : {"wq", "wk", "wv", "wo"}) ps.insert(p + "attn." + w, xavier(rng, d, d, {d, d}));
        for (const char* b : {"bq", "bk", "bv", "bo"}) ps.insert(p + "attn." + b, Tensor::zeros({d}));
        if (dims.relative_pos) ps.insert(p + "attn.relbias", Tensor::zeros({dims.num_heads, 2 * dims.max_rel + 1}));
        ps.insert(p + "ln2.g", ones(d));
        ps.insert(p + "ln2.b", Tensor::zeros({d}));
        ps.insert(p + "ffn.w1", xavier(rng, d, f, {d, f}));
        ps.insert(p + "ffn.b1", Tensor::zeros({f}));
        ps.insert(p + "ffn.w2", xavier(rng, f, d, {f, d}));
        ps.insert(p + "ffn.b2", Tensor::zeros({d}));
    }
    ps.insert(prefix + "ln_f.g", ones(d));
    ps.insert(prefix + "ln_f.b", Tensor::zeros({d}));
}

Var transformer_forward(Tape& t, ParamVars& pv, const std::string& prefix, const TransformerDims& dims,
                        Var x) {
    const int d = dims.model_dim;
    const int H = dims.num_heads;
    const int dh = d / H;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const int n = t.val(x).shape[0];

    Tensor mask = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) mask.at(i, j) = -1e30;
    std::vector<int> pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = i;

    for (int i = 0; i < dims.num_layers; ++i) {
        const std::string p = prefix + "block" + std::to_string(i) + ".";
        Var ln1 = t.layer_norm(x, pv(p + "ln1.g"), pv(p + "ln1.b"));
        Var Q = affine(t, ln1, pv(p + "attn.wq"), pv(p + "attn.bq"));
        Var K = affine(t, ln1, pv(p + "attn.wk"), pv(p + "attn.bk"));
        Var V = affine(t, ln1, pv(p + "attn.wv"), pv(p + "attn.bv"));
        std::vector<Var> heads;
        heads.reserve(static_cast<std::size_t>(H));
        for (int h = 0; h < H; ++h) {
            Var qh = t.slice_cols(Q, h * dh, dh);
            Var kh = t.slice_cols(K, h * dh, dh);
            Var vh = t.slice_cols(V, h * dh, dh);
            Var s = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
            if (dims.relative_pos)
                s = t.add_rel_bias(s, t.slice_rows(pv(p + "attn.relbias"), h, 1), pos, pos, dims.max_rel);
            s = t.add_const(s, mask);
            heads.push_back(t.matmul(t.softmax_rows(s), vh));
        }
        Var attn = affine(t, t.concat_cols(heads), pv(p + "attn.wo"), pv(p + "attn.bo"));
        x = t.add(x, attn);
        Var ln2 = t.layer_norm(x, pv(p + "ln2.g"), pv(p + "ln2.b"));
        Var h1 = t.swish_(affine(t, ln2, pv(p + "ffn.w1"), pv(p + "ffn.b1")));
        Var h2 = affine(t, h1, pv(p + "ffn.w2"), pv(p + "ffn.b2"));
        x = t.add(x, h2);
    }
    return t.layer_norm(x, pv(prefix + "ln_f.g"), pv(prefix + "ln_f.b"));
}

} // namespace fastturn::nn
