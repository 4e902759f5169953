#include "fastturn/ctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fastturn::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

} // namespace

int min_frames(const std::vector<int>& target) {
    int n = static_cast<int>(target.size());
    for (std::size_t i = 1; i < target.size(); ++i)
        if (target[i] == target[i - 1]) ++n;
    return n;
}

CtcLossResult ctc_loss(const nn::Tensor& log_probs, const std::vector<int>& target, int blank_id) {
    if (log_probs.rank() != 2) throw std::invalid_argument("ctc_loss: log_probs must be T x (V+1)");
    const int T = log_probs.shape[0];
    const int V1 = log_probs.shape[1];
    if (T < 1) throw std::invalid_argument("ctc_loss: need at least one frame");
    for (int tgt : target) {
        if (tgt == blank_id) throw std::invalid_argument("ctc_loss: target contains blank");
        if (tgt < 0 || tgt >= V1) throw std::invalid_argument("ctc_loss: target id out of range");
    }

    CtcLossResult res;
    res.grad = nn::Tensor::zeros(log_probs.shape);
    if (min_frames(target) > T) {
        res.feasible = false;
        res.loss = std::numeric_limits<double>::infinity();
        return res;
    }
    res.feasible = true;

    const int L = static_cast<int>(target.size());
    const int S = 2 * L + 1;
    // extended label sequence: blank, t1, blank, t2, ..., blank
    std::vector<int> ext(static_cast<std::size_t>(S), blank_id);
    for (int i = 0; i < L; ++i) ext[static_cast<std::size_t>(2 * i + 1)] = target[static_cast<std::size_t>(i)];

    auto lp = [&](int t, int s) { return log_probs.at(t, ext[static_cast<std::size_t>(s)]); };
    auto can_skip = [&](int s) {
        return s >= 2 && ext[static_cast<std::size_t>(s)] != blank_id &&
               ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
    };

    std::vector<double> alpha(static_cast<std::size_t>(T) * S, kNegInf);
    std::vector<double> beta(static_cast<std::size_t>(T) * S, kNegInf);
    auto A = [&](int t, int s) -> double& { return alpha[static_cast<std::size_t>(t) * S + s]; };
    auto B = [&](int t, int s) -> double& { return beta[static_cast<std::size_t>(t) * S + s]; };

    A(0, 0) = lp(0, 0);
    if (S > 1) A(0, 1) = lp(0, 1);
    for (int t = 1; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
            double acc = A(t - 1, s);
            if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
            if (can_skip(s)) acc = log_add(acc, A(t - 1, s - 2));
            A(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, s);
        }
    }

    double log_z = A(T - 1, S - 1);
    if (S > 1) log_z = log_add(log_z, A(T - 1, S - 2));
    res.loss = -log_z;

    B(T - 1, S - 1) = lp(T - 1, S - 1);
    if (S > 1) B(T - 1, S - 2) = lp(T - 1, S - 2);
    for (int t = T - 2; t >= 0; --t) {
        for (int s = S - 1; s >= 0; --s) {
            double acc = B(t + 1, s);
            if (s + 1 < S) acc = log_add(acc, B(t + 1, s + 1));
            if (s + 2 < S && can_skip(s + 2)) acc = log_add(acc, B(t + 1, s + 2));
            B(t, s) = acc == kNegInf ? kNegInf : acc + lp(t, s);
        }
    }

    // gamma(t,s) = alpha + beta - lp double-counts the frame-t emission;
    // d loss / d lp[t][k] = -exp(LSE_{s: ext[s]=k} gamma(t,s) - log_z)
    for (int t = 0; t < T; ++t) {
        std::vector<double> per_label(static_cast<std::size_t>(V1), kNegInf);
        for (int s = 0; s < S; ++s) {
            const double a = A(t, s);
            const double b = B(t, s);
            if (a == kNegInf || b == kNegInf) continue;
            const int k = ext[static_cast<std::size_t>(s)];
            per_label[static_cast<std::size_t>(k)] =
                log_add(per_label[static_cast<std::size_t>(k)], a + b - lp(t, s));
        }
        for (int k = 0; k < V1; ++k) {
            if (per_label[static_cast<std::size_t>(k)] == kNegInf) continue;
            res.grad.at(t, k) = -std::exp(per_label[static_cast<std::size_t>(k)] - log_z);
        }
    }
    return res;
}

nn::Var ctc_loss_node(nn::Tape& tape, nn::Var log_probs, const std::vector<int>& target, int blank_id) {
    CtcLossResult res = ctc_loss(tape.val(log_probs), target, blank_id);
    if (!res.feasible) throw std::invalid_argument("ctc_loss_node: infeasible target for given length");
    const bool ng = tape.needs_grad(log_probs);
    nn::Tensor grad = std::move(res.grad);
    nn::Var out = tape.push_node(nn::Tensor::scalar(res.loss), ng, nullptr);
    if (ng) {
        tape.set_back(out, [log_probs, grad, out](nn::Tape& t) {
            const double g = t.grad(out).v[0];
            nn::Tensor& gl = t.grad(log_probs);
            for (std::size_t i = 0; i < grad.v.size(); ++i) gl.v[i] += g * grad.v[i];
        });
    }
    return out;
}

std::vector<int> collapse_path(const std::vector<int>& path, int blank_id) {
    std::vector<int> out;
    int prev = blank_id - 1; // sentinel unequal to anything valid
    bool have_prev = false;
    for (int id : path) {
        if ((!have_prev || id != prev)) {
            if (id != blank_id) out.push_back(id);
        }
        prev = id;
        have_prev = true;
    }
    return out;
}

std::vector<int> greedy_step(GreedyState& state, const double* frame_log_probs, int n) {
    if (n < 1) throw std::invalid_argument("greedy_step: empty frame");
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (frame_log_probs[i] > frame_log_probs[best]) best = i;
    std::vector<int> emitted;
    const bool repeat = state.last_id.has_value() && *state.last_id == best;
    if (best != kBlankId && !repeat) {
        state.transcript.push_back(best);
        emitted.push_back(best);
    }
    state.last_id = best;
    ++state.frames_seen;
    return emitted;
}

std::vector<int> format_ctc_prompt(const std::vector<int>& transcript, const lm::Vocab& vocab) {
    std::vector<int> out;
    out.reserve(transcript.size() + 2);
    out.push_back(vocab.ctc_open());
    for (int t : transcript) out.push_back(vocab.lm_of_ctc(t));
    out.push_back(vocab.ctc_close());
    return out;
}

std::vector<int> strip_ctc_prompt(const std::vector<int>& prompt, const lm::Vocab& vocab) {
    if (prompt.size() < 2 || prompt.front() != vocab.ctc_open() || prompt.back() != vocab.ctc_close())
        throw std::invalid_argument("strip_ctc_prompt: malformed prompt");
    std::vector<int> out;
    for (std::size_t i = 1; i + 1 < prompt.size(); ++i) out.push_back(vocab.ctc_of_lm(prompt[i]));
    return out;
}

std::vector<int> empty_ctc_prompt(const lm::Vocab& vocab) {
    return {vocab.ctc_open(), vocab.ctc_close()};
}

} // namespace fastturn::ctc
