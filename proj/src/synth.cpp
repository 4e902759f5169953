#include "fastturn/data/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "fastturn/common.hpp"

namespace fastturn::data {

void SynthConfig::validate() const {
    if (vocab_size < 4) throw ConfigError("synth: vocab_size must be >= 4 (blank + 3 content symbols)");
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be positive");
    if (frames_per_token_min < 1 || frames_per_token_max < frames_per_token_min)
        throw ConfigError("synth: invalid frames_per_token range");
    if (noise_std < 0.0) throw ConfigError("synth: noise_std must be >= 0");
    if (overlap_prob < 0.0 || overlap_prob > 1.0) throw ConfigError("synth: overlap_prob must be in [0, 1]");
    if (overlap_gain < 0.0) throw ConfigError("synth: overlap_gain must be >= 0");
    if (body_len_min < 1 || body_len_max < body_len_min) throw ConfigError("synth: invalid body length range");
    if (backchannel_tokens < 1) throw ConfigError("synth: need at least one backchannel token");
    if (trailing_silence_min < 0 || trailing_silence_max < trailing_silence_min)
        throw ConfigError("synth: invalid trailing silence range");
    for (int n : num_samples)
        if (n < 0) throw ConfigError("synth: negative sample count");
    if (regular_hi() < regular_lo())
        throw ConfigError("synth: backchannel sub-vocabulary larger than vocab allows (no regular tokens left)");
}

std::vector<double> token_mean(const SynthConfig& cfg, int token) {
    std::vector<double> mean(static_cast<std::size_t>(cfg.feature_dim));
    for (int d = 0; d < cfg.feature_dim; ++d) {
        const double u = nn::Rng::unit_at(cfg.token_mean_seed, static_cast<std::uint64_t>(token),
                                          static_cast<std::uint64_t>(d));
        // f32-representable on purpose
        mean[static_cast<std::size_t>(d)] = static_cast<double>(static_cast<float>(2.0 * u - 1.0));
    }
    return mean;
}

namespace {

struct Rendered {
    FeatureMatrix features;
    std::vector<std::pair<int, int>> alignments;
};

Rendered render(const SynthConfig& cfg, const std::vector<int>& tokens, int trailing_silence, nn::Rng& rng) {
    Rendered r;
    r.features.dim = cfg.feature_dim;
    r.features.frame_period_ms = cfg.frame_period_ms;
    for (int tok : tokens) {
        const int k = static_cast<int>(rng.uniform_int(cfg.frames_per_token_min, cfg.frames_per_token_max));
        const auto mean = token_mean(cfg, tok);
        const int start = r.features.num_frames;
        for (int f = 0; f < k; ++f)
            for (int d = 0; d < cfg.feature_dim; ++d) {
                double v = mean[static_cast<std::size_t>(d)];
                if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.gaussian();
                r.features.values.push_back(v);
            }
        r.features.num_frames += k;
        r.alignments.emplace_back(start, r.features.num_frames);
    }
    for (int f = 0; f < trailing_silence; ++f)
        for (int d = 0; d < cfg.feature_dim; ++d)
            r.features.values.push_back(cfg.noise_std > 0.0 ? cfg.noise_std * rng.gaussian() : 0.0);
    r.features.num_frames += trailing_silence;
    return r;
}

// Additively mix a second speaker (regular tokens only) over a random span.
void maybe_overlap(const SynthConfig& cfg, FeatureMatrix& feats, nn::Rng& rng) {
    if (!rng.bernoulli(cfg.overlap_prob) || feats.num_frames < 2) return;
    const int n = feats.num_frames;
    const int span = static_cast<int>(rng.uniform_int(std::max(1, n / 4), n));
    const int start = static_cast<int>(rng.uniform_int(0, n - span));
    int f = start;
    while (f < start + span) {
        const int tok = static_cast<int>(rng.uniform_int(cfg.regular_lo(), cfg.regular_hi()));
        const auto mean = token_mean(cfg, tok);
        const int k = static_cast<int>(rng.uniform_int(cfg.frames_per_token_min, cfg.frames_per_token_max));
        for (int j = 0; j < k && f < start + span; ++j, ++f)
            for (int d = 0; d < cfg.feature_dim; ++d) {
                double v = cfg.overlap_gain * mean[static_cast<std::size_t>(d)];
                if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.gaussian();
                feats.at(f, d) += v;
            }
    }
}

// no immediate repeats: adjacent duplicate words are rare in speech and the
// CTC repeated-label path stays covered by the loss tests
int draw_distinct(nn::Rng& rng, int lo, int hi, int prev) {
    int tok = static_cast<int>(rng.uniform_int(lo, hi));
    if (tok == prev && hi > lo) tok = lo + (tok - lo + 1) % (hi - lo + 1);
    return tok;
}

std::vector<int> body_tokens(const SynthConfig& cfg, int len, nn::Rng& rng) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(len));
    int prev = -1;
    for (int i = 0; i < len; ++i) {
        prev = draw_distinct(rng, cfg.regular_lo(), cfg.regular_hi(), prev);
        out.push_back(prev);
    }
    return out;
}

Sample gen_complete(const SynthConfig& cfg, nn::Rng& rng, const std::string& id) {
    Sample s;
    s.id = id;
    s.turn_state = TurnState::Complete;
    s.source = "synthesized";
    s.tokens = body_tokens(cfg, static_cast<int>(rng.uniform_int(cfg.body_len_min, cfg.body_len_max)), rng);
    s.tokens.push_back(cfg.eot_token());
    const int silence = static_cast<int>(rng.uniform_int(cfg.trailing_silence_min, cfg.trailing_silence_max));
    Rendered r = render(cfg, s.tokens, silence, rng);
    s.features = std::move(r.features);
    s.alignments = std::move(r.alignments);
    maybe_overlap(cfg, s.features, rng);
    return s;
}

Sample gen_backchannel(const SynthConfig& cfg, nn::Rng& rng, const std::string& id) {
    Sample s;
    s.id = id;
    s.turn_state = TurnState::Backchannel;
    s.source = "synthesized";
    const int len = static_cast<int>(rng.uniform_int(1, 3));
    int prev = -1;
    for (int i = 0; i < len; ++i) {
        prev = draw_distinct(rng, cfg.backchannel_lo(), cfg.backchannel_hi(), prev);
        s.tokens.push_back(prev);
    }
    const int silence = static_cast<int>(rng.uniform_int(cfg.trailing_silence_min, cfg.trailing_silence_max));
    Rendered r = render(cfg, s.tokens, silence, rng);
    s.features = std::move(r.features);
    s.alignments = std::move(r.alignments);
    maybe_overlap(cfg, s.features, rng);
    return s;
}

Sample gen_wait(const SynthConfig& cfg, nn::Rng& rng, const std::string& id) {
    Sample s;
    s.id = id;
    s.turn_state = TurnState::Wait;
    s.source = "synthesized";
    const int body = static_cast<int>(rng.uniform_int(1, std::max(1, cfg.body_len_max - 1)));
    s.tokens = body_tokens(cfg, body, rng);
    s.tokens.push_back(cfg.wait_token());
    const int silence = static_cast<int>(rng.uniform_int(cfg.trailing_silence_min, cfg.trailing_silence_max));
    Rendered r = render(cfg, s.tokens, silence, rng);
    s.features = std::move(r.features);
    s.alignments = std::move(r.alignments);
    maybe_overlap(cfg, s.features, rng);
    return s;
}

} // namespace

Sample make_incomplete(const Sample& sample, nn::Rng& rng, int eot_token) {
    if (sample.turn_state != TurnState::Complete)
        throw ConfigError("make_incomplete: input must be a complete turn");
    const int n = static_cast<int>(sample.tokens.size());
    if (n < 2) throw ConfigError("make_incomplete: sample has fewer than 2 tokens, no valid truncation point");

    // candidate cuts keep tokens [0, c); c in [1, n-1]
    std::vector<int> cuts;
    for (int c = 1; c <= n - 1; ++c)
        if (sample.tokens[static_cast<std::size_t>(c - 1)] != eot_token) cuts.push_back(c);
    if (cuts.empty())
        throw ConfigError("make_incomplete: every truncation of " + sample.id + " still ends with the end-of-turn pattern");
    const int c = cuts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cuts.size()) - 1))];

    Sample out;
    out.id = sample.id + "-inc";
    out.turn_state = TurnState::Incomplete;
    out.source = sample.source;
    out.tokens.assign(sample.tokens.begin(), sample.tokens.begin() + c);
    out.alignments.assign(sample.alignments.begin(), sample.alignments.begin() + c);
    const int cut_frame = out.alignments.back().second;
    out.features = sample.features.prefix(cut_frame);
    return out;
}

std::vector<Sample> synth_corpus(const SynthConfig& cfg) {
    cfg.validate();
    nn::Rng root(cfg.seed);
    std::vector<Sample> out;

    auto id_of = [](TurnState st, int i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%04d", to_string(st), i);
        return std::string(buf);
    };

    for (TurnState st : all_turn_states()) {
        const int want = cfg.num_samples[static_cast<std::size_t>(static_cast<int>(st))];
        for (int i = 0; i < want; ++i) {
            nn::Rng rng = root.fork(std::string(to_string(st)) + "/" + std::to_string(i));
            switch (st) {
                case TurnState::Complete:
                    out.push_back(gen_complete(cfg, rng, id_of(st, i)));
                    break;
                case TurnState::Incomplete: {
                    // body length >= 2 content tokens guarantees a valid cut
                    Sample parent = gen_complete(cfg, rng, id_of(st, i));
                    Sample inc = make_incomplete(parent, rng, cfg.eot_token());
                    inc.id = id_of(st, i);
                    out.push_back(std::move(inc));
                    break;
                }
                case TurnState::Backchannel:
                    out.push_back(gen_backchannel(cfg, rng, id_of(st, i)));
                    break;
                case TurnState::Wait:
                    out.push_back(gen_wait(cfg, rng, id_of(st, i)));
                    break;
            }
        }
    }
    return out;
}

} // namespace fastturn::data
