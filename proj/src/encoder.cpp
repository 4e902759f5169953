#include "fastturn/enc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastturn/common.hpp"
#include "fastturn/nn/kernels.hpp"

namespace fastturn::enc {

namespace k = nn::kernels;
using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
    if (num_heads < 1 || model_dim % num_heads != 0)
        throw ConfigError("encoder: model_dim must be divisible by num_heads");
    if (conv_kernel < 1) throw ConfigError("encoder: conv_kernel must be >= 1");
    if (subsampling_factor != 1 && subsampling_factor != 2 && subsampling_factor != 4)
        throw ConfigError("encoder: subsampling_factor must be 1, 2 or 4");
    if (chunk_frames < 1 || chunk_frames % subsampling_factor != 0)
        throw ConfigError("encoder: chunk_frames must be a positive multiple of subsampling_factor");
    if (mid_layer_index < 1 || mid_layer_index > num_layers)
        throw ConfigError("encoder: mid_layer_index out of range");
    if (left_context_chunks < 0) throw ConfigError("encoder: left_context_chunks must be >= 0");
    if (feature_dim < 1) throw ConfigError("encoder: feature_dim must be >= 1");
    if (ffn_mult < 1) throw ConfigError("encoder: ffn_mult must be >= 1");
    if (max_rel_dist < 1) throw ConfigError("encoder: max_rel_dist must be >= 1");
}

int EncoderConfig::num_subsample_blocks() const {
    return subsampling_factor == 4 ? 2 : (subsampling_factor == 2 ? 1 : 0);
}

namespace {

std::string blk(int i) { return "encoder.block" + std::to_string(i) + "."; }
std::string sub(int i) { return "encoder.front" + std::to_string(i) + "."; }

Tensor xavier(nn::Rng& rng, int fan_in, int fan_out, std::vector<int> shape) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

} // namespace

void init_encoder_params(nn::ParameterSet& ps, const EncoderConfig& cfg, nn::Rng rng) {
    cfg.validate();
    const int d = cfg.model_dim;
    const int f = cfg.ffn_mult * d;
    const int R = cfg.max_rel_dist;

    for (int i = 0; i < cfg.num_subsample_blocks(); ++i) {
        const int in = i == 0 ? cfg.feature_dim : d;
        ps.insert(sub(i) + "w", xavier(rng, in, d, {in, d}));
        ps.insert(sub(i) + "b", Tensor::zeros({d}));
        ps.insert(sub(i) + "dw", xavier(rng, 2, 1, {2, d}));
        ps.insert(sub(i) + "dwb", Tensor::zeros({d}));
    }
    if (cfg.num_subsample_blocks() == 0) {
        // stride-1 input projection keeps the layer stack dim-uniform
        ps.insert("encoder.front0.w", xavier(rng, cfg.feature_dim, d, {cfg.feature_dim, d}));
        ps.insert("encoder.front0.b", Tensor::zeros({d}));
    }

    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string p = blk(i);
        auto ln = [&](const char* name) {
            Tensor g = Tensor::zeros({d});
            for (double& x : g.v) x = 1.0;
            ps.insert(p + name + ".g", std::move(g));
            ps.insert(p + name + ".b", Tensor::zeros({d}));
        };
        ln("ln1");
        ps.insert(p + "ffn1.w1", xavier(rng, d, f, {d, f}));
        ps.insert(p + "ffn1.b1", Tensor::zeros({f}));
        ps.insert(p + "ffn1.w2", xavier(rng, f, d, {f, d}));
        ps.insert(p + "ffn1.b2", Tensor::zeros({d}));
        ln("ln2");
        for (const char* w : {"wq", "wk", "wv", "wo"}) ps.insert(p + "attn." + w, xavier(rng, d, d, {d, d}));
        for (const char* b : {"bq", "bk", "bv", "bo"}) ps.insert(p + "attn." + b, Tensor::zeros({d}));
        ps.insert(p + "attn.relbias", Tensor::zeros({cfg.num_heads, 2 * R + 1}));
        ln("ln3");
        ps.insert(p + "conv.pw1", xavier(rng, d, 2 * d, {d, 2 * d}));
        ps.insert(p + "conv.pw1b", Tensor::zeros({2 * d}));
        ps.insert(p + "conv.dw", xavier(rng, cfg.conv_kernel, 1, {cfg.conv_kernel, d}));
        ps.insert(p + "conv.dwb", Tensor::zeros({d}));
        ps.insert(p + "conv.pw2", xavier(rng, d, d, {d, d}));
        ps.insert(p + "conv.pw2b", Tensor::zeros({d}));
        ln("ln4");
        ps.insert(p + "ffn2.w1", xavier(rng, d, f, {d, f}));
        ps.insert(p + "ffn2.b1", Tensor::zeros({f}));
        ps.insert(p + "ffn2.w2", xavier(rng, f, d, {f, d}));
        ps.insert(p + "ffn2.b2", Tensor::zeros({d}));
        ln("ln5");
    }
}

// ---------------------------------------------------------------------------
// offline (tape) path
// ---------------------------------------------------------------------------

namespace {

Var ffn_half(nn::Tape& t, nn::ParamVars& pv, const std::string& p, Var x_ln) {
    Var h = nn::affine(t, x_ln, pv(p + "w1"), pv(p + "b1"));
    h = t.swish_(h);
    return nn::affine(t, h, pv(p + "w2"), pv(p + "b2"));
}

} // namespace

EncoderTaps encoder_forward(nn::Tape& t, nn::ParamVars& pv, const EncoderConfig& cfg,
                            const data::FeatureMatrix& feats) {
    cfg.validate();
    if (feats.num_frames > 0 && feats.dim != cfg.feature_dim)
        throw std::invalid_argument("encoder_forward: feature dim mismatch");
    const int d = cfg.model_dim;
    const int H = cfg.num_heads;
    const int dh = d / H;
    const int R = cfg.max_rel_dist;
    const int co = cfg.chunk_out();
    const int L = cfg.left_context_chunks;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Var x = t.leaf(Tensor({feats.num_frames, feats.num_frames > 0 ? feats.dim : cfg.feature_dim},
                          feats.values));
    if (feats.num_frames == 0) x = t.leaf(Tensor::zeros({0, cfg.feature_dim}));

    if (cfg.num_subsample_blocks() == 0) {
        x = nn::affine(t, x, pv("encoder.front0.w"), pv("encoder.front0.b"));
    } else {
        for (int i = 0; i < cfg.num_subsample_blocks(); ++i) {
            x = nn::affine(t, x, pv(sub(i) + "w"), pv(sub(i) + "b"));
            x = t.depthwise_conv_causal(x, pv(sub(i) + "dw"), pv(sub(i) + "dwb"), 2);
            x = t.swish_(x);
        }
    }

    const int n = t.val(x).shape[0];
    EncoderTaps taps;
    if (n == 0) {
        Var empty = t.leaf(Tensor::zeros({0, d}));
        taps.top = empty;
        taps.mid = empty;
        return taps;
    }

    const int num_chunks = (n + co - 1) / co;
    for (int b = 0; b < cfg.num_layers; ++b) {
        const std::string p = blk(b);
        Var x1 = t.add(x, t.scale(ffn_half(t, pv, p + "ffn1.", t.layer_norm(x, pv(p + "ln1.g"), pv(p + "ln1.b"))), 0.5));

        Var ln2 = t.layer_norm(x1, pv(p + "ln2.g"), pv(p + "ln2.b"));
        Var Q = nn::affine(t, ln2, pv(p + "attn.wq"), pv(p + "attn.bq"));
        Var K = nn::affine(t, ln2, pv(p + "attn.wk"), pv(p + "attn.bk"));
        Var V = nn::affine(t, ln2, pv(p + "attn.wv"), pv(p + "attn.bv"));
        Var relbias = pv(p + "attn.relbias");

        std::vector<Var> chunk_rows;
        for (int c = 0; c < num_chunks; ++c) {
            const int r0 = c * co;
            const int r1 = std::min(n, r0 + co);
            const int m = r1 - r0;
            const int w0 = std::max(0, (c - L) * co);
            const int wlen = r1 - w0;
            Var q = t.slice_rows(Q, r0, m);
            Var kw = t.slice_rows(K, w0, wlen);
            Var vw = t.slice_rows(V, w0, wlen);
            std::vector<int> qpos(static_cast<std::size_t>(m)), kpos(static_cast<std::size_t>(wlen));
            for (int i = 0; i < m; ++i) qpos[static_cast<std::size_t>(i)] = r0 + i;
            for (int i = 0; i < wlen; ++i) kpos[static_cast<std::size_t>(i)] = w0 + i;
            std::vector<Var> heads;
            heads.reserve(static_cast<std::size_t>(H));
            for (int h = 0; h < H; ++h) {
                Var qh = t.slice_cols(q, h * dh, dh);
                Var kh = t.slice_cols(kw, h * dh, dh);
                Var vh = t.slice_cols(vw, h * dh, dh);
                Var s = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
                s = t.add_rel_bias(s, t.slice_rows(relbias, h, 1), qpos, kpos, R);
                Var pr = t.softmax_rows(s);
                heads.push_back(t.matmul(pr, vh));
            }
            chunk_rows.push_back(t.concat_cols(heads));
        }
        Var attn = num_chunks == 1 ? chunk_rows[0] : t.concat_rows(chunk_rows);
        attn = nn::affine(t, attn, pv(p + "attn.wo"), pv(p + "attn.bo"));
        Var x2 = t.add(x1, attn);

        Var ln3 = t.layer_norm(x2, pv(p + "ln3.g"), pv(p + "ln3.b"));
        Var z = nn::affine(t, ln3, pv(p + "conv.pw1"), pv(p + "conv.pw1b"));
        Var za = t.slice_cols(z, 0, d);
        Var zg = t.sigmoid_(t.slice_cols(z, d, d));
        z = t.mul(za, zg);
        z = t.depthwise_conv_causal(z, pv(p + "conv.dw"), pv(p + "conv.dwb"), 1);
        z = t.swish_(z);
        z = nn::affine(t, z, pv(p + "conv.pw2"), pv(p + "conv.pw2b"));
        Var x3 = t.add(x2, z);

        Var x4 = t.add(x3, t.scale(ffn_half(t, pv, p + "ffn2.", t.layer_norm(x3, pv(p + "ln4.g"), pv(p + "ln4.b"))), 0.5));
        x = t.layer_norm(x4, pv(p + "ln5.g"), pv(p + "ln5.b"));
        if (b + 1 == cfg.mid_layer_index) taps.mid = x;
    }
    taps.top = x;
    if (!taps.mid.valid()) taps.mid = taps.top;
    return taps;
}

// ---------------------------------------------------------------------------
// streaming path (raw kernels; same arithmetic, chunk at a time)
// ---------------------------------------------------------------------------

namespace {

// rows-major work buffers as flat vectors
using Rows = std::vector<double>;

void affine_rows(Rows& out, const Rows& in, int m, int in_dim, const Tensor& w, const Tensor& b) {
    out.assign(static_cast<std::size_t>(m) * w.shape[1], 0.0);
    if (m > 0) k::matmul(out.data(), in.data(), w.v.data(), m, in_dim, w.shape[1]);
    const int n = w.shape[1];
    for (int i = 0; i < m; ++i) {
        double* r = out.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) r[j] += b.v[static_cast<std::size_t>(j)];
    }
}

void lnorm_rows(Rows& out, const Rows& in, int m, int n, const Tensor& g, const Tensor& b) {
    out.resize(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        k::layernorm_row(out.data() + static_cast<std::size_t>(i) * n,
                         in.data() + static_cast<std::size_t>(i) * n, g.v.data(), b.v.data(), n, 1e-6,
                         nullptr, nullptr);
}

void swish_rows(Rows& x) {
    for (double& v : x) v = k::swish_val(v);
}

void add_scaled(Rows& x, const Rows& y, double s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * y[i];
}

void add_rows(Rows& x, const Rows& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

} // namespace

StreamingEncoder::StreamingEncoder(const nn::ParameterSet& params, const EncoderConfig& cfg)
    : params_(&params), cfg_(cfg) {
    cfg_.validate();
    blocks_.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& b : blocks_) {
        b.conv_tail.assign(static_cast<std::size_t>(cfg.conv_kernel - 1) * cfg.model_dim, 0.0);
    }
}

StreamingEncoder::ChunkOut StreamingEncoder::encode_chunk(const data::FeatureMatrix& frames, bool final_chunk) {
    if (frames.num_frames > 0 && frames.dim != cfg_.feature_dim)
        throw std::invalid_argument("encode_chunk: feature dim mismatch");
    return encode_chunk(frames.values.data(), frames.num_frames, final_chunk);
}

StreamingEncoder::ChunkOut StreamingEncoder::encode_chunk(const double* frames, int n_frames, bool final_chunk) {
    if (finalized_) throw std::logic_error("encode_chunk: chunk fed after final flag");
    if (!final_chunk && n_frames != cfg_.chunk_frames)
        throw std::invalid_argument("encode_chunk: non-final chunk must have exactly chunk_frames frames");
    if (final_chunk) finalized_ = true;
    frames_consumed_ += n_frames;

    const int d = cfg_.model_dim;
    const int H = cfg_.num_heads;
    const int dh = d / H;
    const int R = cfg_.max_rel_dist;
    const int co = cfg_.chunk_out();
    const int L = cfg_.left_context_chunks;
    const int K = cfg_.conv_kernel;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const nn::ParameterSet& ps = *params_;

    ChunkOut out;
    out.top = Tensor::zeros({0, d});
    out.mid = Tensor::zeros({0, d});
    if (n_frames == 0) return out;

    // frontend
    Rows x(frames, frames + static_cast<std::size_t>(n_frames) * cfg_.feature_dim);
    int m = n_frames;
    if (cfg_.num_subsample_blocks() == 0) {
        Rows tmp;
        affine_rows(tmp, x, m, cfg_.feature_dim, ps.at("encoder.front0.w"), ps.at("encoder.front0.b"));
        x = std::move(tmp);
    } else {
        int in_dim = cfg_.feature_dim;
        for (int i = 0; i < cfg_.num_subsample_blocks(); ++i) {
            Rows tmp;
            affine_rows(tmp, x, m, in_dim, ps.at(sub(i) + "w"), ps.at(sub(i) + "b"));
            const Tensor& dw = ps.at(sub(i) + "dw");
            const Tensor& dwb = ps.at(sub(i) + "dwb");
            const int mo = m / 2;
            Rows conv(static_cast<std::size_t>(mo) * d);
            for (int t2 = 0; t2 < mo; ++t2) {
                const int anchor = 2 * t2 + 1;
                for (int c = 0; c < d; ++c) {
                    double acc = dwb.v[static_cast<std::size_t>(c)];
                    for (int kk = 0; kk < 2; ++kk) {
                        const int ti = anchor - 1 + kk;
                        acc += dw.at(kk, c) * tmp[static_cast<std::size_t>(ti) * d + c];
                    }
                    conv[static_cast<std::size_t>(t2) * d + c] = acc;
                }
            }
            swish_rows(conv);
            x = std::move(conv);
            m = mo;
            in_dim = d;
        }
    }
    if (m == 0) return out;

    const int p0 = next_pos_;
    Rows mid_rows;

    for (int b = 0; b < cfg_.num_layers; ++b) {
        const std::string p = blk(b);
        BlockCache& cache = blocks_[static_cast<std::size_t>(b)];

        // ffn1 half
        Rows ln, h1, h2;
        lnorm_rows(ln, x, m, d, ps.at(p + "ln1.g"), ps.at(p + "ln1.b"));
        affine_rows(h1, ln, m, d, ps.at(p + "ffn1.w1"), ps.at(p + "ffn1.b1"));
        swish_rows(h1);
        affine_rows(h2, h1, m, cfg_.ffn_mult * d, ps.at(p + "ffn1.w2"), ps.at(p + "ffn1.b2"));
        add_scaled(x, h2, 0.5);

        // attention
        Rows q, kq, vq;
        lnorm_rows(ln, x, m, d, ps.at(p + "ln2.g"), ps.at(p + "ln2.b"));
        affine_rows(q, ln, m, d, ps.at(p + "attn.wq"), ps.at(p + "attn.bq"));
        affine_rows(kq, ln, m, d, ps.at(p + "attn.wk"), ps.at(p + "attn.bk"));
        affine_rows(vq, ln, m, d, ps.at(p + "attn.wv"), ps.at(p + "attn.bv"));
        cache.kv_k.insert(cache.kv_k.end(), kq.begin(), kq.end());
        cache.kv_v.insert(cache.kv_v.end(), vq.begin(), vq.end());
        for (int i = 0; i < m; ++i) cache.kv_pos.push_back(p0 + i);

        const int W = static_cast<int>(cache.kv_pos.size());
        const Tensor& relbias = ps.at(p + "attn.relbias");
        Rows attn_cat(static_cast<std::size_t>(m) * d);
        Rows qh(static_cast<std::size_t>(m) * dh), kh(static_cast<std::size_t>(W) * dh),
            vh(static_cast<std::size_t>(W) * dh), scores(static_cast<std::size_t>(m) * W),
            oh(static_cast<std::size_t>(m) * dh);
        for (int h = 0; h < H; ++h) {
            for (int i = 0; i < m; ++i)
                std::copy(q.begin() + static_cast<std::ptrdiff_t>(i) * d + h * dh,
                          q.begin() + static_cast<std::ptrdiff_t>(i) * d + h * dh + dh,
                          qh.begin() + static_cast<std::ptrdiff_t>(i) * dh);
            for (int j = 0; j < W; ++j) {
                std::copy(cache.kv_k.begin() + static_cast<std::ptrdiff_t>(j) * d + h * dh,
                          cache.kv_k.begin() + static_cast<std::ptrdiff_t>(j) * d + h * dh + dh,
                          kh.begin() + static_cast<std::ptrdiff_t>(j) * dh);
                std::copy(cache.kv_v.begin() + static_cast<std::ptrdiff_t>(j) * d + h * dh,
                          cache.kv_v.begin() + static_cast<std::ptrdiff_t>(j) * d + h * dh + dh,
                          vh.begin() + static_cast<std::ptrdiff_t>(j) * dh);
            }
            for (int i = 0; i < m; ++i) {
                double* srow = scores.data() + static_cast<std::size_t>(i) * W;
                for (int j = 0; j < W; ++j)
                    srow[j] = k::dot(qh.data() + static_cast<std::size_t>(i) * dh,
                                     kh.data() + static_cast<std::size_t>(j) * dh, dh);
                for (int j = 0; j < W; ++j) srow[j] *= inv_sqrt;
                for (int j = 0; j < W; ++j) {
                    int delta = cache.kv_pos[static_cast<std::size_t>(j)] - (p0 + i);
                    delta = std::clamp(delta, -R, R);
                    srow[j] += relbias.at(h, delta + R);
                }
                k::softmax_row(srow, srow, W);
            }
            if (m > 0) k::matmul(oh.data(), scores.data(), vh.data(), m, W, dh);
            for (int i = 0; i < m; ++i)
                std::copy(oh.begin() + static_cast<std::ptrdiff_t>(i) * dh,
                          oh.begin() + static_cast<std::ptrdiff_t>(i) * dh + dh,
                          attn_cat.begin() + static_cast<std::ptrdiff_t>(i) * d + h * dh);
        }
        Rows attn;
        affine_rows(attn, attn_cat, m, d, ps.at(p + "attn.wo"), ps.at(p + "attn.bo"));
        add_rows(x, attn);

        // conv module
        Rows z2;
        lnorm_rows(ln, x, m, d, ps.at(p + "ln3.g"), ps.at(p + "ln3.b"));
        affine_rows(z2, ln, m, d, ps.at(p + "conv.pw1"), ps.at(p + "conv.pw1b"));
        Rows z(static_cast<std::size_t>(m) * d);
        for (int i = 0; i < m; ++i)
            for (int c = 0; c < d; ++c) {
                const double a = z2[static_cast<std::size_t>(i) * 2 * d + c];
                const double g = z2[static_cast<std::size_t>(i) * 2 * d + d + c];
                z[static_cast<std::size_t>(i) * d + c] = a * k::sigmoid_val(g);
            }
        // ext = [tail | z]; outputs for the m current rows
        Rows ext(cache.conv_tail.size() + z.size());
        std::copy(cache.conv_tail.begin(), cache.conv_tail.end(), ext.begin());
        std::copy(z.begin(), z.end(), ext.begin() + static_cast<std::ptrdiff_t>(cache.conv_tail.size()));
        const Tensor& dw = ps.at(p + "conv.dw");
        const Tensor& dwb = ps.at(p + "conv.dwb");
        Rows conv(static_cast<std::size_t>(m) * d);
        for (int i = 0; i < m; ++i) {
            // ext row (K-1+i) is current row i; window is the K rows ending there
            for (int c = 0; c < d; ++c) {
                double acc = dwb.v[static_cast<std::size_t>(c)];
                for (int kk = 0; kk < K; ++kk)
                    acc += dw.at(kk, c) * ext[static_cast<std::size_t>(i + kk) * d + c];
                conv[static_cast<std::size_t>(i) * d + c] = acc;
            }
        }
        // tail := last K-1 rows of ext
        std::copy(ext.end() - static_cast<std::ptrdiff_t>(static_cast<std::size_t>(K - 1) * d), ext.end(),
                  cache.conv_tail.begin());
        swish_rows(conv);
        Rows conv_out;
        affine_rows(conv_out, conv, m, d, ps.at(p + "conv.pw2"), ps.at(p + "conv.pw2b"));
        add_rows(x, conv_out);

        // ffn2 half + closing norm
        lnorm_rows(ln, x, m, d, ps.at(p + "ln4.g"), ps.at(p + "ln4.b"));
        affine_rows(h1, ln, m, d, ps.at(p + "ffn2.w1"), ps.at(p + "ffn2.b1"));
        swish_rows(h1);
        affine_rows(h2, h1, m, cfg_.ffn_mult * d, ps.at(p + "ffn2.w2"), ps.at(p + "ffn2.b2"));
        add_scaled(x, h2, 0.5);
        lnorm_rows(ln, x, m, d, ps.at(p + "ln5.g"), ps.at(p + "ln5.b"));
        x = ln;

        // trim kv window to the left context for the next chunk
        const std::size_t keep = static_cast<std::size_t>(L) * co;
        if (cache.kv_pos.size() > keep) {
            const std::size_t drop = cache.kv_pos.size() - keep;
            cache.kv_k.erase(cache.kv_k.begin(), cache.kv_k.begin() + static_cast<std::ptrdiff_t>(drop * d));
            cache.kv_v.erase(cache.kv_v.begin(), cache.kv_v.begin() + static_cast<std::ptrdiff_t>(drop * d));
            cache.kv_pos.erase(cache.kv_pos.begin(), cache.kv_pos.begin() + static_cast<std::ptrdiff_t>(drop));
        }

        if (b + 1 == cfg_.mid_layer_index) mid_rows = x;
    }

    next_pos_ += m;
    out.top = Tensor({m, d}, std::move(x));
    out.mid = Tensor({m, d}, std::move(mid_rows));
    return out;
}

} // namespace fastturn::enc
