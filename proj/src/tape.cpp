#include "fastturn/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastturn/nn/kernels.hpp"

namespace fastturn::nn {

namespace k = kernels;

Var Tape::push_node(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.val = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_back(Var x, std::function<void(Tape&)> back) {
    Node& n = nodes_[static_cast<std::size_t>(x.id)];
    if (n.needs_grad) n.back = std::move(back);
}

Var Tape::leaf(Tensor value, bool needs_grad) { return push_node(std::move(value), needs_grad, {}); }

Tensor& Tape::grad(Var x) {
    Node& n = nodes_[static_cast<std::size_t>(x.id)];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros(n.val.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::backward(Var root) {
    if (val(root).numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!nodes_[static_cast<std::size_t>(root.id)].needs_grad) return;
    grad(root).v[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.needs_grad && n.back && n.grad_alloc) n.back(*this);
    }
}

static void check2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(who) + ": rank-2 tensor expected");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check2d(A, "matmul");
    check2d(B, "matmul");
    const int m = A.shape[0], kk = A.shape[1], n = B.shape[1];
    if (B.shape[0] != kk) throw std::invalid_argument("matmul: inner dims differ");
    Tensor y = Tensor::zeros({m, n});
    k::matmul(y.v.data(), A.v.data(), B.v.data(), m, kk, n);
    const bool ng = needs_grad(a) || needs_grad(b);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, b, out, m, kk, n](Tape& t) {
            const Tensor& g = t.grad(out);
            if (t.needs_grad(a))
                k::matmul_grad_a(t.grad(a).v.data(), g.v.data(), t.val(b).v.data(), m, kk, n);
            if (t.needs_grad(b))
                k::matmul_grad_b(t.grad(b).v.data(), t.val(a).v.data(), g.v.data(), m, kk, n);
        };
    }
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check2d(A, "matmul_nt");
    check2d(B, "matmul_nt");
    const int m = A.shape[0], kk = A.shape[1], n = B.shape[0];
    if (B.shape[1] != kk) throw std::invalid_argument("matmul_nt: inner dims differ");
    Tensor y = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) y.at(i, j) = k::dot(A.row(i), B.row(j), kk);
    const bool ng = needs_grad(a) || needs_grad(b);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, b, out, m, kk, n](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& A2 = t.val(a);
            const Tensor& B2 = t.val(b);
            if (t.needs_grad(a)) {
                // gA[i,:] += sum_j g[i,j] * B[j,:]
                Tensor& ga = t.grad(a);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double gij = g.at(i, j);
                        const double* br = B2.row(j);
                        double* gr = ga.row(i);
                        for (int p = 0; p < kk; ++p) gr[p] += gij * br[p];
                    }
            }
            if (t.needs_grad(b)) {
                // gB[j,:] += sum_i g[i,j] * A[i,:]
                Tensor& gb = t.grad(b);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double gij = g.at(i, j);
                        const double* ar = A2.row(i);
                        double* gr = gb.row(j);
                        for (int p = 0; p < kk; ++p) gr[p] += gij * ar[p];
                    }
            }
        };
    }
    return out;
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Tensor y = A;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += B.v[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, b, out](Tape& t) {
            const Tensor& g = t.grad(out);
            if (t.needs_grad(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
            }
            if (t.needs_grad(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i];
            }
        };
    }
    return out;
}

Var Tape::add_rowvec(Var a, Var bvec) {
    const Tensor& A = val(a);
    const Tensor& B = val(bvec);
    check2d(A, "add_rowvec");
    const int m = A.shape[0], n = A.shape[1];
    if (B.numel() != n) throw std::invalid_argument("add_rowvec: width mismatch");
    Tensor y = A;
    for (int i = 0; i < m; ++i) {
        double* r = y.row(i);
        for (int j = 0; j < n; ++j) r[j] += B.v[static_cast<std::size_t>(j)];
    }
    const bool ng = needs_grad(a) || needs_grad(bvec);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, bvec, out, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            if (t.needs_grad(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
            }
            if (t.needs_grad(bvec)) {
                Tensor& gb = t.grad(bvec);
                for (int i = 0; i < m; ++i) {
                    const double* r = g.row(i);
                    for (int j = 0; j < n; ++j) gb.v[static_cast<std::size_t>(j)] += r[j];
                }
            }
        };
    }
    return out;
}

Var Tape::scale(Var a, double c) {
    Tensor y = val(a);
    for (double& x : y.v) x *= c;
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out, c](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += c * g.v[i];
        };
    }
    return out;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Tensor y = A;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] *= B.v[i];
    const bool ng = needs_grad(a) || needs_grad(b);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, b, out](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& A2 = t.val(a);
            const Tensor& B2 = t.val(b);
            if (t.needs_grad(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * B2.v[i];
            }
            if (t.needs_grad(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * A2.v[i];
            }
        };
    }
    return out;
}

Var Tape::tanh_(Var a) {
    Tensor y = val(a);
    for (double& x : y.v) x = std::tanh(x);
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& y2 = t.val(out);
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * (1.0 - y2.v[i] * y2.v[i]);
        };
    }
    return out;
}

Var Tape::sigmoid_(Var a) {
    Tensor y = val(a);
    for (double& x : y.v) x = k::sigmoid_val(x);
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& y2 = t.val(out);
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * y2.v[i] * (1.0 - y2.v[i]);
        };
    }
    return out;
}

Var Tape::swish_(Var a) {
    const Tensor& A = val(a);
    Tensor y = A;
    for (double& x : y.v) x = k::swish_val(x);
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& x2 = t.val(a);
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) {
                const double s = k::sigmoid_val(x2.v[i]);
                ga.v[i] += g.v[i] * s * (1.0 + x2.v[i] * (1.0 - s));
            }
        };
    }
    return out;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& X = val(x);
    check2d(X, "layer_norm");
    const int m = X.shape[0], n = X.shape[1];
    if (val(gamma).numel() != n || val(beta).numel() != n)
        throw std::invalid_argument("layer_norm: gamma/beta width mismatch");
    Tensor y = Tensor::zeros({m, n});
    std::vector<double> means(static_cast<std::size_t>(m)), invs(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        k::layernorm_row(y.row(i), X.row(i), val(gamma).v.data(), val(beta).v.data(), n, eps,
                         &means[static_cast<std::size_t>(i)], &invs[static_cast<std::size_t>(i)]);
    const bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [x, gamma, beta, out, m, n, means, invs](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& X2 = t.val(x);
            const Tensor& G = t.val(gamma);
            for (int i = 0; i < m; ++i) {
                const double mu = means[static_cast<std::size_t>(i)];
                const double inv = invs[static_cast<std::size_t>(i)];
                const double* xr = X2.row(i);
                const double* gr = g.row(i);
                if (t.needs_grad(gamma)) {
                    Tensor& gg = t.grad(gamma);
                    for (int j = 0; j < n; ++j) gg.v[static_cast<std::size_t>(j)] += gr[j] * ((xr[j] - mu) * inv);
                }
                if (t.needs_grad(beta)) {
                    Tensor& gb = t.grad(beta);
                    for (int j = 0; j < n; ++j) gb.v[static_cast<std::size_t>(j)] += gr[j];
                }
                if (t.needs_grad(x)) {
                    // dxhat = g * gamma; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                    double s1 = 0.0, s2 = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double dxh = gr[j] * G.v[static_cast<std::size_t>(j)];
                        const double xh = (xr[j] - mu) * inv;
                        s1 += dxh;
                        s2 += dxh * xh;
                    }
                    s1 /= n;
                    s2 /= n;
                    Tensor& gx = t.grad(x);
                    double* gxr = gx.row(i);
                    for (int j = 0; j < n; ++j) {
                        const double dxh = gr[j] * G.v[static_cast<std::size_t>(j)];
                        const double xh = (xr[j] - mu) * inv;
                        gxr[j] += inv * (dxh - s1 - xh * s2);
                    }
                }
            }
        };
    }
    return out;
}

Var Tape::softmax_rows(Var x) {
    const Tensor& X = val(x);
    check2d(X, "softmax_rows");
    const int m = X.shape[0], n = X.shape[1];
    Tensor y = Tensor::zeros({m, n});
    k::softmax_rows(y.v.data(), X.v.data(), m, n);
    const bool ng = needs_grad(x);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [x, out, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& y2 = t.val(out);
            Tensor& gx = t.grad(x);
            for (int i = 0; i < m; ++i) {
                const double* yr = y2.row(i);
                const double* gr = g.row(i);
                double dotv = 0.0;
                for (int j = 0; j < n; ++j) dotv += gr[j] * yr[j];
                double* gxr = gx.row(i);
                for (int j = 0; j < n; ++j) gxr[j] += yr[j] * (gr[j] - dotv);
            }
        };
    }
    return out;
}

Var Tape::log_softmax_rows(Var x) {
    const Tensor& X = val(x);
    check2d(X, "log_softmax_rows");
    const int m = X.shape[0], n = X.shape[1];
    Tensor y = Tensor::zeros({m, n});
    k::log_softmax_rows(y.v.data(), X.v.data(), m, n);
    const bool ng = needs_grad(x);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [x, out, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& y2 = t.val(out);
            Tensor& gx = t.grad(x);
            for (int i = 0; i < m; ++i) {
                const double* yr = y2.row(i);
                const double* gr = g.row(i);
                double gsum = 0.0;
                for (int j = 0; j < n; ++j) gsum += gr[j];
                double* gxr = gx.row(i);
                for (int j = 0; j < n; ++j) gxr[j] += gr[j] - std::exp(yr[j]) * gsum;
            }
        };
    }
    return out;
}

Var Tape::slice_rows(Var a, int r0, int h) {
    const Tensor& A = val(a);
    check2d(A, "slice_rows");
    const int n = A.shape[1];
    if (r0 < 0 || h < 0 || r0 + h > A.shape[0]) throw std::invalid_argument("slice_rows: out of range");
    Tensor y = Tensor::zeros({h, n});
    std::copy(A.row(r0), A.row(r0) + static_cast<std::size_t>(h) * n, y.v.begin());
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out, r0, h, n](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& ga = t.grad(a);
            for (int i = 0; i < h; ++i) {
                const double* gr = g.row(i);
                double* gar = ga.row(r0 + i);
                for (int j = 0; j < n; ++j) gar[j] += gr[j];
            }
        };
    }
    return out;
}

Var Tape::slice_cols(Var a, int c0, int w) {
    const Tensor& A = val(a);
    check2d(A, "slice_cols");
    const int m = A.shape[0];
    if (c0 < 0 || w < 0 || c0 + w > A.shape[1]) throw std::invalid_argument("slice_cols: out of range");
    Tensor y = Tensor::zeros({m, w});
    for (int i = 0; i < m; ++i) std::copy(A.row(i) + c0, A.row(i) + c0 + w, y.row(i));
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out, c0, w, m](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& ga = t.grad(a);
            for (int i = 0; i < m; ++i) {
                const double* gr = g.row(i);
                double* gar = ga.row(i) + c0;
                for (int j = 0; j < w; ++j) gar[j] += gr[j];
            }
        };
    }
    return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int n = val(parts[0]).shape[1];
    int m = 0;
    for (Var p : parts) {
        check2d(val(p), "concat_rows");
        if (val(p).shape[1] != n) throw std::invalid_argument("concat_rows: width mismatch");
        m += val(p).shape[0];
    }
    Tensor y = Tensor::zeros({m, n});
    int r = 0;
    for (Var p : parts) {
        const Tensor& P = val(p);
        std::copy(P.v.begin(), P.v.end(), y.row(r));
        r += P.shape[0];
    }
    bool ng = false;
    for (Var p : parts) ng = ng || needs_grad(p);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        std::vector<Var> ps = parts;
        nodes_.back().back = [ps, out, n](Tape& t) {
            const Tensor& g = t.grad(out);
            int r2 = 0;
            for (Var p : ps) {
                const int h = t.val(p).shape[0];
                if (t.needs_grad(p)) {
                    Tensor& gp = t.grad(p);
                    for (int i = 0; i < h; ++i) {
                        const double* gr = g.row(r2 + i);
                        double* gpr = gp.row(i);
                        for (int j = 0; j < n; ++j) gpr[j] += gr[j];
                    }
                }
                r2 += h;
            }
        };
    }
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int m = val(parts[0]).shape[0];
    int n = 0;
    for (Var p : parts) {
        check2d(val(p), "concat_cols");
        if (val(p).shape[0] != m) throw std::invalid_argument("concat_cols: height mismatch");
        n += val(p).shape[1];
    }
    Tensor y = Tensor::zeros({m, n});
    int c = 0;
    for (Var p : parts) {
        const Tensor& P = val(p);
        const int w = P.shape[1];
        for (int i = 0; i < m; ++i) std::copy(P.row(i), P.row(i) + w, y.row(i) + c);
        c += w;
    }
    bool ng = false;
    for (Var p : parts) ng = ng || needs_grad(p);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        std::vector<Var> ps = parts;
        nodes_.back().back = [ps, out, m](Tape& t) {
            const Tensor& g = t.grad(out);
            int c2 = 0;
            for (Var p : ps) {
                const int w = t.val(p).shape[1];
                if (t.needs_grad(p)) {
                    Tensor& gp = t.grad(p);
                    for (int i = 0; i < m; ++i) {
                        const double* gr = g.row(i) + c2;
                        double* gpr = gp.row(i);
                        for (int j = 0; j < w; ++j) gpr[j] += gr[j];
                    }
                }
                c2 += w;
            }
        };
    }
    return out;
}

Var Tape::embedding_rows(Var table, std::vector<int> ids) {
    const Tensor& T = val(table);
    check2d(T, "embedding_rows");
    const int n = T.shape[1];
    const int m = static_cast<int>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= T.shape[0]) throw std::invalid_argument("embedding_rows: id out of range");
    Tensor y = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) std::copy(T.row(ids[static_cast<std::size_t>(i)]), T.row(ids[static_cast<std::size_t>(i)]) + n, y.row(i));
    const bool ng = needs_grad(table);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [table, out, ids, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& gt = t.grad(table);
            for (int i = 0; i < m; ++i) {
                const double* gr = g.row(i);
                double* tr = gt.row(ids[static_cast<std::size_t>(i)]);
                for (int j = 0; j < n; ++j) tr[j] += gr[j];
            }
        };
    }
    return out;
}

Var Tape::mean_rows(Var x) {
    const Tensor& X = val(x);
    check2d(X, "mean_rows");
    const int m = X.shape[0], n = X.shape[1];
    if (m < 1) throw std::invalid_argument("mean_rows: empty input");
    Tensor y = Tensor::zeros({1, n});
    for (int i = 0; i < m; ++i) {
        const double* r = X.row(i);
        for (int j = 0; j < n; ++j) y.v[static_cast<std::size_t>(j)] += r[j];
    }
    for (double& v : y.v) v /= m;
    const bool ng = needs_grad(x);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [x, out, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& gx = t.grad(x);
            for (int i = 0; i < m; ++i) {
                double* gr = gx.row(i);
                for (int j = 0; j < n; ++j) gr[j] += g.v[static_cast<std::size_t>(j)] / m;
            }
        };
    }
    return out;
}

Var Tape::add_const(Var a, Tensor c) {
    const Tensor& A = val(a);
    if (!A.same_shape(c)) throw std::invalid_argument("add_const: shape mismatch");
    Tensor y = A;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += c.v[i];
    const bool ng = needs_grad(a);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [a, out](Tape& t) {
            const Tensor& g = t.grad(out);
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
        };
    }
    return out;
}

Var Tape::add_rel_bias(Var scores, Var bias, std::vector<int> qpos, std::vector<int> kpos, int max_rel) {
    const Tensor& S = val(scores);
    check2d(S, "add_rel_bias");
    const int m = S.shape[0], n = S.shape[1];
    if (static_cast<int>(qpos.size()) != m || static_cast<int>(kpos.size()) != n)
        throw std::invalid_argument("add_rel_bias: position count mismatch");
    if (val(bias).numel() != 2 * max_rel + 1) throw std::invalid_argument("add_rel_bias: bias size");
    Tensor y = S;
    const Tensor& B = val(bias);
    for (int i = 0; i < m; ++i) {
        double* r = y.row(i);
        for (int j = 0; j < n; ++j) {
            int d = kpos[static_cast<std::size_t>(j)] - qpos[static_cast<std::size_t>(i)];
            d = std::clamp(d, -max_rel, max_rel);
            r[j] += B.v[static_cast<std::size_t>(d + max_rel)];
        }
    }
    const bool ng = needs_grad(scores) || needs_grad(bias);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [scores, bias, out, qpos, kpos, max_rel, m, n](Tape& t) {
            const Tensor& g = t.grad(out);
            if (t.needs_grad(scores)) {
                Tensor& gs = t.grad(scores);
                for (std::size_t i = 0; i < g.v.size(); ++i) gs.v[i] += g.v[i];
            }
            if (t.needs_grad(bias)) {
                Tensor& gb = t.grad(bias);
                for (int i = 0; i < m; ++i) {
                    const double* gr = g.row(i);
                    for (int j = 0; j < n; ++j) {
                        int d = kpos[static_cast<std::size_t>(j)] - qpos[static_cast<std::size_t>(i)];
                        d = std::clamp(d, -max_rel, max_rel);
                        gb.v[static_cast<std::size_t>(d + max_rel)] += gr[j];
                    }
                }
            }
        };
    }
    return out;
}

Var Tape::depthwise_conv_causal(Var x, Var w, Var b, int stride) {
    const Tensor& X = val(x);
    const Tensor& W = val(w);
    check2d(X, "depthwise_conv_causal");
    check2d(W, "depthwise_conv_causal");
    const int T = X.shape[0], d = X.shape[1], K = W.shape[0];
    if (W.shape[1] != d) throw std::invalid_argument("depthwise_conv_causal: channel mismatch");
    if (val(b).numel() != d) throw std::invalid_argument("depthwise_conv_causal: bias size");
    if (stride < 1) throw std::invalid_argument("depthwise_conv_causal: stride");
    const int To = T / stride;
    Tensor y = Tensor::zeros({To, d});
    const Tensor& B = val(b);
    for (int t = 0; t < To; ++t) {
        double* yr = y.row(t);
        const int anchor = t * stride + stride - 1; // last input frame of this step
        for (int c = 0; c < d; ++c) {
            double acc = B.v[static_cast<std::size_t>(c)];
            for (int kk = 0; kk < K; ++kk) {
                const int ti = anchor - (K - 1) + kk;
                if (ti >= 0) acc += W.at(kk, c) * X.at(ti, c);
            }
            yr[c] = acc;
        }
    }
    const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    Var out = push_node(std::move(y), ng, nullptr);
    if (ng) {
        nodes_.back().back = [x, w, b, out, T, d, K, stride, To](Tape& t) {
            const Tensor& g = t.grad(out);
            const Tensor& X2 = t.val(x);
            const Tensor& W2 = t.val(w);
            for (int to = 0; to < To; ++to) {
                const double* gr = g.row(to);
                const int anchor = to * stride + stride - 1;
                if (t.needs_grad(b)) {
                    Tensor& gb = t.grad(b);
                    for (int c = 0; c < d; ++c) gb.v[static_cast<std::size_t>(c)] += gr[c];
                }
                for (int kk = 0; kk < K; ++kk) {
                    const int ti = anchor - (K - 1) + kk;
                    if (ti < 0) continue;
                    if (t.needs_grad(w)) {
                        Tensor& gw = t.grad(w);
                        for (int c = 0; c < d; ++c) gw.at(kk, c) += gr[c] * X2.at(ti, c);
                    }
                    if (t.needs_grad(x)) {
                        Tensor& gx = t.grad(x);
                        for (int c = 0; c < d; ++c) gx.at(ti, c) += gr[c] * W2.at(kk, c);
                    }
                }
            }
        };
    }
    return out;
}

Var Tape::cross_entropy(Var logits, std::vector<int> targets) {
    const Tensor& L = val(logits);
    check2d(L, "cross_entropy");
    const int m = L.shape[0], n = L.shape[1];
    if (static_cast<int>(targets.size()) != m) throw std::invalid_argument("cross_entropy: target count mismatch");
    for (int tgt : targets)
        if (tgt < 0 || tgt >= n) throw std::invalid_argument("cross_entropy: target out of range");
    Tensor lp = Tensor::zeros({m, n});
    k::log_softmax_rows(lp.v.data(), L.v.data(), m, n);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) loss -= lp.at(i, targets[static_cast<std::size_t>(i)]);
    loss /= m;
    const bool ng = needs_grad(logits);
    Var out = push_node(Tensor::scalar(loss), ng, nullptr);
    if (ng) {
        nodes_.back().back = [logits, out, targets, lp, m, n](Tape& t) {
            const double g = t.grad(out).v[0];
            Tensor& gl = t.grad(logits);
            for (int i = 0; i < m; ++i) {
                const double* lpr = lp.row(i);
                double* gr = gl.row(i);
                for (int j = 0; j < n; ++j) {
                    const double p = std::exp(lpr[j]);
                    const double onehot = (j == targets[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
                    gr[j] += g * (p - onehot) / m;
                }
            }
        };
    }
    return out;
}

} // namespace fastturn::nn
