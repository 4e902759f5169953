#pragma once

#include <array>
#include <cstdint>

#include "fastturn/data/manifest.hpp"
#include "fastturn/nn/rng.hpp"

namespace fastturn::data {

// Synthetic corpus generator. Each content token owns a fixed mean feature
// vector; a token is rendered as a run of frames around that mean. The
// content vocabulary is partitioned (from the top) into an end-of-turn token,
// a wait-phrase token, and a backchannel sub-vocabulary; everything below is
// the regular body pool. State signatures:
//   complete    = body tokens, end-of-turn token, trailing silence
//   incomplete  = a complete turn truncated at a token boundary (no silence)
//   backchannel = 1..3 tokens from the backchannel sub-vocabulary, silence
//   wait        = body tokens, wait token, trailing silence
struct SynthConfig {
    int vocab_size = 16; // blank + content symbols
    std::array<int, kNumTurnStates> num_samples{100, 100, 100, 100};
    int frames_per_token_min = 8;
    int frames_per_token_max = 12;
    double noise_std = 0.0;
    double overlap_prob = 0.0;
    double overlap_gain = 0.8;
    std::uint64_t seed = 1;

    int feature_dim = 16;
    int body_len_min = 3;
    int body_len_max = 8;
    int backchannel_tokens = 2;
    int trailing_silence_min = 8;
    int trailing_silence_max = 24;
    std::uint64_t token_mean_seed = 7777;
    double frame_period_ms = 10.0;

    void validate() const;

    int content() const { return vocab_size - 1; }
    int eot_token() const { return content(); }
    int wait_token() const { return content() - 1; }
    int backchannel_lo() const { return content() - 1 - backchannel_tokens; }
    int backchannel_hi() const { return content() - 2; }
    int regular_lo() const { return 1; }
    int regular_hi() const { return content() - 2 - backchannel_tokens; }
};

// Mean feature vector of a content token; components are f32-representable so
// noiseless features survive the feature-file format exactly.
std::vector<double> token_mean(const SynthConfig& cfg, int token);

std::vector<Sample> synth_corpus(const SynthConfig& cfg);

// Truncation-based negative: cut a complete turn at a random token boundary
// strictly before its final token, dropping any cut that would still end in
// the end-of-turn pattern. Features, tokens and alignments are cut at the
// same frame. The input sample is untouched.
Sample make_incomplete(const Sample& sample, nn::Rng& rng, int eot_token);

} // namespace fastturn::data
