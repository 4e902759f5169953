#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastturn/data/synth.hpp"
#include "fastturn/pipeline/train.hpp"
#include "testutil.hpp"

using namespace fastturn;

namespace {

std::vector<std::uint8_t> params_bytes_with_prefix(const nn::ParameterSet& ps, const std::string& prefix) {
    nn::ParameterSet subset;
    for (const auto& [name, t] : ps.entries())
        if (name.rfind(prefix, 0) == 0) subset.insert(name, t);
    return subset.to_bytes();
}

std::vector<data::Sample> tiny_corpus(const EngineConfig& cfg) {
    return data::synth_corpus(cfg.synth);
}

} // namespace

TEST_CASE("learning-rate warmup is exactly linear") {
    const double base = 4e-3;
    for (int s = 1; s < 10; ++s)
        CHECK(pipeline::warmup_lr(base, s, 10) == base * static_cast<double>(s) / 10.0);
    CHECK(pipeline::warmup_lr(base, 10, 10) == base);
    CHECK(pipeline::warmup_lr(base, 37, 10) == base);
    CHECK(pipeline::warmup_lr(base, 1, 0) == base);

    // the full schedule keeps the exact warmup ramp, then decays linearly
    pipeline::StageSchedule sched{"x", base, 10, 110, {}, "ctc_asr"};
    for (int s2 = 1; s2 < 10; ++s2) CHECK(pipeline::schedule_lr(sched, s2) == base * s2 / 10.0);
    CHECK(pipeline::schedule_lr(sched, 10) == base);
    CHECK(pipeline::schedule_lr(sched, 110) == doctest::Approx(0.1 * base));
    CHECK(pipeline::schedule_lr(sched, 60) == doctest::Approx(0.55 * base));
}

TEST_CASE("prompt dropout: identity at p=0, bound at 0.5, empirical rate") {
    lm::Vocab vocab(6);
    const std::vector<int> prompt = {vocab.ctc_open(), 0, 1, vocab.ctc_close()};
    nn::Rng rng(1);
    for (int i = 0; i < 10000; ++i)
        CHECK(pipeline::apply_prompt_dropout(prompt, 0.0, rng, vocab) == prompt);

    CHECK_THROWS_AS(pipeline::apply_prompt_dropout(prompt, 0.5, rng, vocab), ConfigError);
    CHECK_THROWS_AS(pipeline::apply_prompt_dropout(prompt, 0.7, rng, vocab), ConfigError);

    int dropped = 0;
    for (int i = 0; i < 10000; ++i) {
        auto out = pipeline::apply_prompt_dropout(prompt, 0.3, rng, vocab);
        if (out == ctc::empty_ctc_prompt(vocab)) ++dropped;
        else CHECK(out == prompt);
    }
    const double rate = dropped / 10000.0;
    CHECK(rate > 0.28);
    CHECK(rate < 0.32);
}

TEST_CASE("prompt_dropout_p >= 0.5 is rejected at config time") {
    pipeline::TrainConfig cfg;
    cfg.prompt_dropout_p = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.prompt_dropout_p = 0.49;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("each stage trains only its own parameters (freeze bit-identity)") {
    EngineConfig cfg = testutil::tiny_config();
    Engine eng = Engine::init(cfg);
    const auto corpus = tiny_corpus(cfg);

    struct StageRun {
        std::string name;
        std::function<void()> run;
        std::vector<std::string> trainable;
    };
    const std::vector<std::string> all = {"encoder.", "ctc_head.", "lm.",
                                          "llm_adapter.", "acoustic_adapter.", "detector."};
    std::vector<StageRun> stages = {
        {"1a", [&] { pipeline::run_stage1a(eng, corpus, cfg.training.stage1a, 2, cfg.training.seed, {}); },
         pipeline::stage_trainable_prefixes("1a")},
        {"1b", [&] { pipeline::run_stage1b(eng, corpus, cfg.training.stage1b, 2, cfg.training.seed, {}); },
         pipeline::stage_trainable_prefixes("1b")},
        {"2", [&] { pipeline::run_stage2(eng, corpus, cfg.training, {}); },
         pipeline::stage_trainable_prefixes("2")},
        {"3", [&] { pipeline::run_stage3(eng, corpus, cfg.training, {}); },
         pipeline::stage_trainable_prefixes("3")},
        {"4", [&] { pipeline::run_stage4(eng, corpus, cfg.training, {}); },
         pipeline::stage_trainable_prefixes("4")},
    };

    for (auto& st : stages) {
        std::map<std::string, std::vector<std::uint8_t>> before;
        for (const auto& p : all) before[p] = params_bytes_with_prefix(eng.params, p);
        st.run();
        for (const auto& p : all) {
            const bool trainable =
                std::find(st.trainable.begin(), st.trainable.end(), p) != st.trainable.end();
            const auto after = params_bytes_with_prefix(eng.params, p);
            INFO("stage " << st.name << " prefix " << p);
            if (trainable)
                CHECK(after != before[p]);
            else
                CHECK(after == before[p]); // frozen parameters bit-identical
        }
    }
}

TEST_CASE("training loss decreases and logs are emitted") {
    EngineConfig cfg = testutil::tiny_config();
    cfg.training.stage1a.total_steps = 30;
    cfg.training.stage1a.warmup_steps = 10;
    cfg.training.stage1a.lr = 3e-3;
    Engine eng = Engine::init(cfg);
    const auto corpus = tiny_corpus(cfg);

    std::vector<pipeline::TrainLogEntry> log;
    pipeline::run_stage1a(eng, corpus, cfg.training.stage1a, 4, cfg.training.seed,
                          [&](const pipeline::TrainLogEntry& e) { log.push_back(e); });
    REQUIRE(log.size() == 30);
    CHECK(log.front().stage == "1a");
    CHECK(log.front().lr == doctest::Approx(3e-3 * 1.0 / 10.0)); // warmup step 1 of 10
    double first5 = 0.0, last5 = 0.0;
    for (int i = 0; i < 5; ++i) {
        first5 += log[static_cast<std::size_t>(i)].loss;
        last5 += log[log.size() - 1 - static_cast<std::size_t>(i)].loss;
    }
    CHECK(last5 < first5); // trending down on the toy corpus
}

TEST_CASE("same seed reproduces training bit-exactly") {
    EngineConfig cfg = testutil::tiny_config();
    auto run = [&]() {
        Engine eng = Engine::init(cfg);
        const auto corpus = tiny_corpus(cfg);
        pipeline::run_stage1a(eng, corpus, cfg.training.stage1a, 2, cfg.training.seed, {});
        pipeline::run_stage1b(eng, corpus, cfg.training.stage1b, 2, cfg.training.seed, {});
        return eng.params.to_bytes();
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    EngineConfig cfg = testutil::tiny_config();
    cfg.training.stage1a.lr = 1e18; // blows the parameters up in a couple of steps
    cfg.training.stage1a.warmup_steps = 0;
    cfg.training.stage1a.total_steps = 20;
    Engine eng = Engine::init(cfg);
    const auto corpus = tiny_corpus(cfg);
    CHECK_THROWS_AS(pipeline::run_stage1a(eng, corpus, cfg.training.stage1a, 2, cfg.training.seed, {}),
                    TrainError);
}
