#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fastturn/data/manifest.hpp"
#include "fastturn/data/synth.hpp"
#include "testutil.hpp"

using namespace fastturn;
using data::FeatureMatrix;
using data::Sample;
using data::SynthConfig;
using data::TurnState;

namespace fs = std::filesystem;

static fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("fastturn_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

TEST_CASE("feature file round trip") {
    FeatureMatrix m;
    m.num_frames = 3;
    m.dim = 2;
    m.frame_period_ms = 10.0;
    m.values = {1.0, -2.5, 0.0, 4.25, -0.125, 8.0}; // f32-exact values
    const auto p = scratch_dir("ftfe") / "a.ftfe";
    data::write_features(p.string(), m);
    FeatureMatrix back = data::read_features(p.string());
    CHECK(back.num_frames == 3);
    CHECK(back.dim == 2);
    CHECK(back.values == m.values);
    // file-level round trip is bit-identical
    CHECK(data::features_to_bytes(back) == data::features_to_bytes(m));
}

TEST_CASE("feature file: zero frames, bad magic, truncation") {
    FeatureMatrix empty;
    empty.num_frames = 0;
    empty.dim = 5;
    auto bytes = data::features_to_bytes(empty);
    FeatureMatrix back = data::features_from_bytes(bytes);
    CHECK(back.num_frames == 0);
    CHECK(back.dim == 5);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(data::features_from_bytes(bad), IoError);

    FeatureMatrix m;
    m.num_frames = 10;
    m.dim = 2;
    m.values.assign(20, 1.0);
    auto full = data::features_to_bytes(m);
    // header says 10 frames, payload holds 9
    std::vector<std::uint8_t> truncated(full.begin(), full.end() - 8);
    CHECK_THROWS_AS(data::features_from_bytes(truncated), IoError);
}

TEST_CASE("manifest loads one line per sample with positioned errors") {
    const auto dir = scratch_dir("manifest");
    {
        std::ofstream out(dir / "manifest.jsonl");
        out << R"({"id":"a","turn_state":"complete","tokens":[1],"alignments":[[0,4]],"features":"a.ftfe","source":"real"})" << "\n";
        out << R"({"id":"b","turn_state":"incomplete","tokens":[2],"alignments":[[0,4]],"features":"b.ftfe","source":"real"})" << "\n";
        out << R"({"id":"c","turn_state":"backchannel","tokens":[3],"alignments":[[0,4]],"features":"c.ftfe","source":"real"})" << "\n";
        out << R"({"id":"d","turn_state":"wait","tokens":[4],"alignments":[[0,4]],"features":"d.ftfe","source":"synthesized","extra_key":42})" << "\n";
    }
    auto descs = data::load_manifest((dir / "manifest.jsonl").string());
    REQUIRE(descs.size() == 4);
    auto stats = data::summarize(descs);
    for (long c : stats.count) CHECK(c == 1);

    // empty file -> empty sequence
    { std::ofstream out(dir / "empty.jsonl"); }
    CHECK(data::load_manifest((dir / "empty.jsonl").string()).empty());

    // unknown turn state, with the line number in the message
    {
        std::ofstream out(dir / "bad_state.jsonl");
        out << R"({"id":"a","turn_state":"complete","tokens":[],"alignments":[],"features":"a.ftfe","source":"real"})" << "\n";
        out << R"({"id":"x","turn_state":"does_not_exist","tokens":[],"alignments":[],"features":"x.ftfe","source":"real"})" << "\n";
    }
    try {
        data::load_manifest((dir / "bad_state.jsonl").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        CHECK(std::string(e.what()).find("does_not_exist") != std::string::npos);
    }

    // missing required field
    {
        std::ofstream out(dir / "missing.jsonl");
        out << R"({"id":"a","turn_state":"complete","alignments":[],"features":"a.ftfe","source":"real"})" << "\n";
    }
    CHECK_THROWS_AS(data::load_manifest((dir / "missing.jsonl").string()), ConfigError);
}

TEST_CASE("alignment out of feature range is caught when features load") {
    const auto dir = scratch_dir("align");
    FeatureMatrix m;
    m.num_frames = 6;
    m.dim = 2;
    m.values.assign(12, 0.5);
    data::write_features((dir / "a.ftfe").string(), m);
    {
        std::ofstream out(dir / "manifest.jsonl");
        out << R"({"id":"a","turn_state":"complete","tokens":[1],"alignments":[[0,9]],"features":"a.ftfe","source":"real"})" << "\n";
    }
    CHECK_THROWS_AS(data::load_corpus((dir / "manifest.jsonl").string()), ConfigError);

    // non-monotone alignments are rejected at manifest level already
    {
        std::ofstream out(dir / "mono.jsonl");
        out << R"({"id":"a","turn_state":"complete","tokens":[1,2],"alignments":[[4,8],[2,6]],"features":"a.ftfe","source":"real"})" << "\n";
    }
    CHECK_THROWS_AS(data::load_manifest((dir / "mono.jsonl").string()), ConfigError);
}

TEST_CASE("synth corpus: determinism, counts, class signatures") {
    SynthConfig cfg;
    cfg.vocab_size = 12;
    cfg.feature_dim = 8;
    cfg.num_samples = {10, 10, 10, 10};
    cfg.seed = 99;
    auto corpus = data::synth_corpus(cfg);
    auto corpus2 = data::synth_corpus(cfg);
    REQUIRE(corpus.size() == 40);

    // bit-identical rerun
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(corpus[i].tokens == corpus2[i].tokens);
        CHECK(corpus[i].features.values == corpus2[i].features.values);
    }

    std::array<int, 4> hist{};
    for (const auto& s : corpus) {
        hist[static_cast<std::size_t>(static_cast<int>(s.turn_state))]++;
        data::check_alignments(s.tokens, s.alignments, s.features.num_frames, s.id);
        switch (s.turn_state) {
            case TurnState::Complete:
                CHECK(s.tokens.back() == cfg.eot_token());
                break;
            case TurnState::Incomplete:
                CHECK(s.tokens.back() != cfg.eot_token());
                // truncation cuts the features exactly at the last alignment
                CHECK(s.features.num_frames == s.alignments.back().second);
                break;
            case TurnState::Backchannel:
                CHECK(s.tokens.size() <= 3);
                for (int t : s.tokens) {
                    CHECK(t >= cfg.backchannel_lo());
                    CHECK(t <= cfg.backchannel_hi());
                }
                break;
            case TurnState::Wait:
                CHECK(s.tokens.back() == cfg.wait_token());
                break;
        }
    }
    for (int c : hist) CHECK(c == 10);
}

TEST_CASE("noiseless synth features equal the token means exactly") {
    SynthConfig cfg;
    cfg.vocab_size = 12;
    cfg.feature_dim = 8;
    cfg.num_samples = {3, 0, 0, 0};
    cfg.noise_std = 0.0;
    cfg.overlap_prob = 0.0;
    auto corpus = data::synth_corpus(cfg);
    for (const auto& s : corpus) {
        for (std::size_t k = 0; k < s.tokens.size(); ++k) {
            const auto mean = data::token_mean(cfg, s.tokens[k]);
            for (int f = s.alignments[k].first; f < s.alignments[k].second; ++f)
                for (int d = 0; d < cfg.feature_dim; ++d)
                    CHECK(s.features.at(f, d) == mean[static_cast<std::size_t>(d)]);
        }
        // trailing silence is exactly zero
        for (int f = s.alignments.back().second; f < s.features.num_frames; ++f)
            for (int d = 0; d < cfg.feature_dim; ++d) CHECK(s.features.at(f, d) == 0.0);
    }
}

TEST_CASE("make_incomplete cuts at a token boundary and leaves the input untouched") {
    SynthConfig cfg;
    cfg.vocab_size = 12;
    cfg.feature_dim = 8;
    cfg.num_samples = {1, 0, 0, 0};
    cfg.body_len_min = 4;
    cfg.body_len_max = 4;
    auto corpus = data::synth_corpus(cfg);
    const Sample& s = corpus[0]; // 5 tokens: 4 body + eot
    REQUIRE(s.tokens.size() == 5);
    const auto original_values = s.features.values;

    nn::Rng rng(1234);
    for (int rep = 0; rep < 30; ++rep) {
        nn::Rng r = rng.fork(static_cast<std::uint64_t>(rep));
        Sample inc = data::make_incomplete(s, r, cfg.eot_token());
        CHECK(inc.turn_state == TurnState::Incomplete);
        CHECK(inc.tokens.size() >= 1);
        CHECK(inc.tokens.size() < s.tokens.size());
        CHECK(inc.tokens.back() != cfg.eot_token());
        CHECK(inc.features.num_frames == inc.alignments.back().second);
        const std::size_t cut = inc.tokens.size();
        CHECK(inc.features.num_frames == s.alignments[cut - 1].second);
    }
    CHECK(s.features.values == original_values); // untouched

    Sample one = s;
    one.tokens = {1};
    one.alignments = {{0, 4}};
    nn::Rng r2(1);
    CHECK_THROWS_AS(data::make_incomplete(one, r2, cfg.eot_token()), ConfigError);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.vocab_size = 3; // below blank + 3 content
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.overlap_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SynthConfig{};
    cfg.vocab_size = 5;
    cfg.backchannel_tokens = 3; // eot + wait + 3 bc leaves no regular pool
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("write_corpus then load_corpus round trips through the file formats") {
    SynthConfig cfg;
    cfg.vocab_size = 12;
    cfg.feature_dim = 8;
    cfg.num_samples = {2, 2, 2, 2};
    cfg.noise_std = 0.0;
    auto corpus = data::synth_corpus(cfg);
    const auto dir = scratch_dir("corpus_rt");
    const std::string manifest = data::write_corpus(corpus, dir.string());
    auto loaded = data::load_corpus(manifest);
    REQUIRE(loaded.size() == corpus.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == corpus[i].id);
        CHECK(loaded[i].turn_state == corpus[i].turn_state);
        CHECK(loaded[i].tokens == corpus[i].tokens);
        // noiseless values are f32-exact by construction, so they survive
        CHECK(loaded[i].features.values == corpus[i].features.values);
    }
}
