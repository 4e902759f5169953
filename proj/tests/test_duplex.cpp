#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastturn/data/synth.hpp"
#include "fastturn/duplex/session.hpp"
#include "testutil.hpp"

using namespace fastturn;
using data::TurnState;
using duplex::DecisionRecord;
using duplex::DuplexAction;
using duplex::ManualClock;
using duplex::Session;
using duplex::SessionOptions;

namespace {

Engine tiny_engine() { return Engine::init(testutil::tiny_config()); }

data::Sample one_sample(const EngineConfig& cfg, TurnState st, std::uint64_t seed) {
    data::SynthConfig synth = cfg.synth;
    synth.num_samples = {0, 0, 0, 0};
    synth.num_samples[static_cast<std::size_t>(static_cast<int>(st))] = 1;
    synth.seed = seed;
    return data::synth_corpus(synth)[0];
}

} // namespace

TEST_CASE("policy is the fixed exhaustive mapping") {
    CHECK(duplex::policy(TurnState::Complete) == DuplexAction::Respond);
    CHECK(duplex::policy(TurnState::Incomplete) == DuplexAction::KeepListening);
    CHECK(duplex::policy(TurnState::Backchannel) == DuplexAction::IgnoreBackchannel);
    CHECK(duplex::policy(TurnState::Wait) == DuplexAction::HoldAndWait);
}

TEST_CASE("latency_ms definition and clamping") {
    DecisionRecord r;
    r.t_decision_ms = 100.0;
    r.t_segment_end_ms = 100.0;
    CHECK(duplex::latency_ms(r) == 0.0);
    r.t_decision_ms = 142.0;
    CHECK(duplex::latency_ms(r) == 42.0);
    // early decision 100 ms before the end: latency 0, lead time 100
    r.t_decision_ms = 0.0;
    r.t_segment_end_ms = 100.0;
    CHECK(duplex::latency_ms(r) == 0.0);
    CHECK(duplex::lead_time_ms(r) == 100.0);
}

TEST_CASE("unreachable tau never commits early") {
    Engine eng = tiny_engine();
    data::Sample s = one_sample(eng.cfg, TurnState::Complete, 5);
    ManualClock clock;
    SessionOptions opt;
    opt.mode = EngineMode::Unified;
    opt.tau = 1.01;
    opt.k_consecutive = 1;
    Session session(eng, opt, clock);
    session.feed_frames(s.features, 0.0);
    CHECK_FALSE(session.decided());
    DecisionRecord rec = session.finalize_segment(clock.now_ms());
    CHECK_FALSE(rec.early);
    CHECK(rec.frames_consumed_at_decision == s.features.num_frames);
}

TEST_CASE("session guards: feed after finalize, finalize with zero frames") {
    Engine eng = tiny_engine();
    ManualClock clock;
    Session session(eng, {}, clock);
    CHECK_THROWS(session.finalize_segment(0.0)); // zero frames consumed

    data::Sample s = one_sample(eng.cfg, TurnState::Wait, 6);
    Session s2(eng, {}, clock);
    s2.feed_frames(s.features, 0.0);
    s2.finalize_segment(10.0);
    CHECK_THROWS(s2.feed_frames(s.features, 20.0));
    CHECK_THROWS(s2.finalize_segment(20.0));
}

TEST_CASE("replaying an identical stream yields identical records") {
    Engine eng = tiny_engine();
    data::Sample s = one_sample(eng.cfg, TurnState::Backchannel, 7);
    auto run = [&]() {
        ManualClock clock;
        SessionOptions opt;
        opt.mode = EngineMode::Unified;
        opt.tau = 0.5;
        opt.k_consecutive = 2;
        Session session(eng, opt, clock);
        clock.t = 1.0;
        session.feed_frames(s.features, clock.t);
        clock.t = 2.0;
        return session.finalize_segment(clock.t);
    };
    DecisionRecord a = run();
    DecisionRecord b = run();
    CHECK(a.state == b.state);
    CHECK(a.confidence == b.confidence);
    CHECK(a.t_decision_ms == b.t_decision_ms);
    CHECK(a.early == b.early);
    CHECK(a.frames_consumed_at_decision == b.frames_consumed_at_decision);
    CHECK(a.probs == b.probs);
}

TEST_CASE("slicing the stream differently never changes the decision") {
    Engine eng = tiny_engine();
    data::Sample s = one_sample(eng.cfg, TurnState::Complete, 8);
    auto run = [&](int slice) {
        ManualClock clock;
        SessionOptions opt;
        opt.mode = EngineMode::Unified;
        opt.early_exit = false;
        Session session(eng, opt, clock);
        const int fd = eng.cfg.encoder.feature_dim;
        for (int f = 0; f < s.features.num_frames; f += slice) {
            const int n = std::min(slice, s.features.num_frames - f);
            session.feed_frames(s.features.values.data() + static_cast<std::size_t>(f) * fd, n, 0.0);
        }
        return session.finalize_segment(0.0);
    };
    DecisionRecord whole = run(10000);
    for (int slice : {1, 3, 8, 13}) {
        DecisionRecord sliced = run(slice);
        CHECK(sliced.state == whole.state);
        CHECK(sliced.confidence == doctest::Approx(whole.confidence).epsilon(1e-12));
    }
}

TEST_CASE("record validity on random inputs across modes") {
    Engine eng = tiny_engine();
    for (EngineMode mode : {EngineMode::Cascaded, EngineMode::Semantic, EngineMode::Unified}) {
        for (std::uint64_t seed = 10; seed < 14; ++seed) {
            data::Sample s = one_sample(eng.cfg, static_cast<TurnState>(seed % 4), seed);
            ManualClock clock;
            SessionOptions opt;
            opt.mode = mode;
            opt.tau = 0.6;
            Session session(eng, opt, clock);
            session.feed_frames(s.features, 0.0);
            DecisionRecord rec = session.finalize_segment(1.0);
            CHECK(static_cast<int>(rec.state) >= 0);
            CHECK(static_cast<int>(rec.state) < 4);
            CHECK(rec.confidence >= 0.0);
            CHECK(rec.confidence <= 1.0);
            CHECK(rec.frames_consumed_at_decision <= s.features.num_frames);
            double psum = 0.0;
            for (double p : rec.probs) psum += p;
            CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("early-decided sessions return the committed record from finalize") {
    // doctor the detector bias so Unified is always confident in one state,
    // forcing an early commit well before the stream ends
    Engine eng = tiny_engine();
    eng.params.at("detector.l3.b").v = {50.0, -50.0, -50.0, -50.0};
    data::Sample s = one_sample(eng.cfg, TurnState::Complete, 21);
    REQUIRE(s.features.num_frames > 3 * eng.cfg.encoder.chunk_frames);

    ManualClock clock;
    SessionOptions opt;
    opt.mode = EngineMode::Unified;
    opt.tau = 0.9;
    opt.k_consecutive = 2;
    Session session(eng, opt, clock);
    clock.t = 5.0;
    bool early_seen = false;
    const int fd = eng.cfg.encoder.feature_dim;
    const int cf = eng.cfg.encoder.chunk_frames;
    for (int f = 0; f < s.features.num_frames; f += cf) {
        const int n = std::min(cf, s.features.num_frames - f);
        auto events = session.feed_frames(s.features.values.data() + static_cast<std::size_t>(f) * fd, n,
                                          clock.t);
        for (const auto& e : events)
            if (e.type == "early_decision") early_seen = true;
    }
    REQUIRE(early_seen);
    REQUIRE(session.decided());
    clock.t = 9.0;
    DecisionRecord rec = session.finalize_segment(clock.t);
    CHECK(rec.early);
    CHECK(rec.state == TurnState::Complete);
    CHECK(rec.t_decision_ms == 5.0);           // decision content unchanged by finalize
    CHECK(rec.t_segment_end_ms == 9.0);
    CHECK(rec.frames_consumed_at_decision < s.features.num_frames);
    CHECK(duplex::latency_ms(rec) == 0.0);
    CHECK(duplex::lead_time_ms(rec) == 4.0);

    // decision monotonicity under a replay with extra trailing frames
    Session s2(eng, opt, clock);
    s2.feed_frames(s.features, clock.t);
    REQUIRE(s2.decided());
    data::Sample extra = one_sample(eng.cfg, TurnState::Backchannel, 22);
    s2.feed_frames(extra.features, clock.t); // later frames logged, decision kept
    DecisionRecord rec2 = s2.finalize_segment(clock.t);
    CHECK(rec2.state == TurnState::Complete);
}

TEST_CASE("cascaded mode never early-exits on an empty transcript") {
    Engine eng = tiny_engine();
    // blank wins every frame: transcript stays empty
    eng.params.at("ctc_head.b").v[0] = 1e3;
    data::Sample s = one_sample(eng.cfg, TurnState::Complete, 23);

    ManualClock clock;
    SessionOptions opt;
    opt.mode = EngineMode::Cascaded;
    opt.tau = 0.0; // any confidence would pass; the empty-transcript guard must hold
    opt.k_consecutive = 1;
    Session session(eng, opt, clock);
    auto events = session.feed_frames(s.features, 0.0);
    for (const auto& e : events) CHECK(e.type != "early_decision");
    CHECK_FALSE(session.decided());
    CHECK(session.transcript().empty());
}
