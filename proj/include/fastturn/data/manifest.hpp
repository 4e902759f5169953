#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "fastturn/data/features.hpp"
#include "fastturn/data/turn_state.hpp"

namespace fastturn::data {

// One manifest line. Alignment spans are half-open [start, end) frame ranges.
struct SampleDesc {
    std::string id;
    TurnState turn_state = TurnState::Complete;
    std::vector<int> tokens;
    std::vector<std::pair<int, int>> alignments;
    std::string features_rel;
    std::string source;
    // optional manifest extras; -1 when absent
    long num_frames_hint = -1;
    double frame_period_ms_hint = -1.0;
};

// Fully materialized sample with features in memory.
struct Sample {
    std::string id;
    TurnState turn_state = TurnState::Complete;
    std::vector<int> tokens;
    std::vector<std::pair<int, int>> alignments;
    FeatureMatrix features;
    std::string source;
};

// JSON-lines manifest. Required keys per line: id, turn_state, tokens,
// alignments, features, source. Unknown keys are ignored (num_frames and
// frame_period_ms, when present, feed duration statistics). Errors carry the
// 1-based line number.
std::vector<SampleDesc> load_manifest(const std::string& path);

// load_manifest plus feature reads; alignments are checked against the actual
// frame counts here.
std::vector<Sample> load_corpus(const std::string& manifest_path);

// Alignment invariant shared by the loader and the generator: spans are
// non-empty, non-overlapping, monotonically increasing, within [0, limit).
void check_alignments(const std::vector<int>& tokens, const std::vector<std::pair<int, int>>& alignments,
                      long frame_limit, const std::string& context);

struct StateStats {
    std::array<long, kNumTurnStates> count{};
    std::array<double, kNumTurnStates> hours{}; // from num_frames * frame_period_ms when known
};

StateStats summarize(const std::vector<SampleDesc>& descs);

// Writes features/<id>.ftfe plus manifest.jsonl under out_dir.
std::string write_corpus(const std::vector<Sample>& samples, const std::string& out_dir);

} // namespace fastturn::data
