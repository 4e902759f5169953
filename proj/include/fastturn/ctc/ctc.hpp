#pragma once

#include <optional>
#include <vector>

#include "fastturn/lm/vocab.hpp"
#include "fastturn/nn/tape.hpp"
#include "fastturn/nn/tensor.hpp"

namespace fastturn::ctc {

inline constexpr int kBlankId = 0;

// Minimum frame count a target needs: one per label plus one separating blank
// per adjacent repeat.
int min_frames(const std::vector<int>& target);

struct CtcLossResult {
    bool feasible = false;
    double loss = 0.0;   // +infinity when infeasible
    nn::Tensor grad;     // d loss / d log_probs, zeros when infeasible
};

// Log-space forward-backward over a T x (V+1) matrix of per-frame label
// log-scores. Column 0 is the blank. Targets must not contain blanks.
CtcLossResult ctc_loss(const nn::Tensor& log_probs, const std::vector<int>& target,
                       int blank_id = kBlankId);

// Tape node wrapping ctc_loss; the target must be feasible for the given T.
nn::Var ctc_loss_node(nn::Tape& tape, nn::Var log_probs, const std::vector<int>& target,
                      int blank_id = kBlankId);

// Merge adjacent duplicates, then drop blanks.
std::vector<int> collapse_path(const std::vector<int>& path, int blank_id = kBlankId);

struct GreedyState {
    std::optional<int> last_id;  // argmax of the previous frame, blank included
    std::vector<int> transcript; // emitted tokens, never shrinks
    long frames_seen = 0;
};

// One frame of streaming greedy decode; returns the tokens emitted by this
// frame (0 or 1 of them).
std::vector<int> greedy_step(GreedyState& state, const double* frame_log_probs, int n);

// [<ctc>, transcript mapped to LM ids, </ctc>]; markers only when empty.
std::vector<int> format_ctc_prompt(const std::vector<int>& transcript, const lm::Vocab& vocab);

// Inverse of format_ctc_prompt (markers stripped, ids mapped back to CTC).
std::vector<int> strip_ctc_prompt(const std::vector<int>& prompt, const lm::Vocab& vocab);

// Markers-only prompt (the prompt-dropout form).
std::vector<int> empty_ctc_prompt(const lm::Vocab& vocab);

} // namespace fastturn::ctc
