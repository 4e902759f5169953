#pragma once

#include <functional>
#include <vector>

#include "fastturn/nn/tensor.hpp"

namespace fastturn::nn {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Ops append nodes in topological order; backward() walks
// the tape from the loss down. One tape per forward pass; values are
// immutable once recorded. Forward arithmetic routes through the kernels in
// kernels.hpp so the streaming inference paths reuse the exact same sums.
class Tape {
public:
    Var leaf(Tensor value, bool needs_grad = false);

    // y = a @ b            a:[m,k] b:[k,n]
    Var matmul(Var a, Var b);
    // y = a @ b^T          a:[m,k] b:[n,k]  (attention scores; row-dot order)
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var bvec);
    Var scale(Var a, double c);
    Var mul(Var a, Var b);
    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var swish_(Var a);
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6);
    Var softmax_rows(Var x);
    Var log_softmax_rows(Var x);
    Var slice_rows(Var a, int r0, int h);
    Var slice_cols(Var a, int c0, int w);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var embedding_rows(Var table, std::vector<int> ids);
    Var mean_rows(Var x);
    // adds a constant matrix (no gradient to it); used for attention masks
    Var add_const(Var a, Tensor c);
    // scores[i][j] += bias[clamp(kpos[j]-qpos[i], -R, R) + R]
    Var add_rel_bias(Var scores, Var bias, std::vector<int> qpos, std::vector<int> kpos, int max_rel);
    // causal depthwise conv, left zero padding; output length floor(T/stride)
    Var depthwise_conv_causal(Var x, Var w, Var b, int stride = 1);
    // mean over rows of -log_softmax(logits)[i, target_i]; scalar
    Var cross_entropy(Var logits, std::vector<int> targets);

    // plumbing for ops defined outside this class (e.g. CTC loss)
    Var push_node(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    void set_back(Var x, std::function<void(Tape&)> back);

    const Tensor& val(Var x) const { return nodes_[static_cast<std::size_t>(x.id)].val; }
    bool needs_grad(Var x) const { return nodes_[static_cast<std::size_t>(x.id)].needs_grad; }
    // gradient tensor, allocated zero on first access
    Tensor& grad(Var x);

    void backward(Var root);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
        bool needs_grad = false;
        bool grad_alloc = false;
    };
    std::vector<Node> nodes_;
};

// x @ w + b row-broadcast
inline Var affine(Tape& t, Var x, Var w, Var b) { return t.add_rowvec(t.matmul(x, w), b); }

} // namespace fastturn::nn
