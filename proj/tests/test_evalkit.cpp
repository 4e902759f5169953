#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "fastturn/evalkit/metrics.hpp"
#include "fastturn/evalkit/runner.hpp"
#include "testutil.hpp"

using namespace fastturn;
using data::TurnState;
using evalkit::ConfusionCounts;

static const TurnState C = TurnState::Complete;
static const TurnState I = TurnState::Incomplete;
static const TurnState B = TurnState::Backchannel;
static const TurnState W = TurnState::Wait;

TEST_CASE("confusion counts against hand counts") {
    auto c = evalkit::confusion({C, C, C}, {C, C, C}, C);
    CHECK(c.tp == 3);
    CHECK(c.tn == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);

    c = evalkit::confusion({C, I, B, W}, {C, C, B, W}, C);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 2);
    CHECK(c.fp == 0);

    CHECK_THROWS(evalkit::confusion({}, {}, C));
    CHECK_THROWS(evalkit::confusion({C}, {C, C}, C));
}

TEST_CASE("accuracy, miss rate, false alarm: exact values and undefined cases") {
    ConfusionCounts perfect{1, 1, 0, 0, C};
    CHECK(*evalkit::accuracy(perfect) == 1.0);
    CHECK(*evalkit::miss_rate(perfect) == 0.0);
    CHECK(*evalkit::false_alarm(perfect) == 0.0);

    ConfusionCounts mixed{3, 5, 1, 1, C};
    CHECK(*evalkit::accuracy(mixed) == 0.8);
    CHECK(*evalkit::miss_rate(mixed) == 0.25);
    CHECK(*evalkit::false_alarm(mixed) == 1.0 / 6.0);

    ConfusionCounts no_pos{0, 4, 0, 0, C};
    CHECK_FALSE(evalkit::miss_rate(no_pos).has_value()); // tp+fn == 0 -> undefined, not NaN
    ConfusionCounts no_neg{4, 0, 0, 0, C};
    CHECK_FALSE(evalkit::false_alarm(no_neg).has_value());
}

TEST_CASE("metric partition and permutation invariance") {
    nn::Rng rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = static_cast<int>(rng.uniform_int(1, 30));
        std::vector<TurnState> preds, labels;
        for (int i = 0; i < n; ++i) {
            preds.push_back(static_cast<TurnState>(rng.uniform_int(0, 3)));
            labels.push_back(static_cast<TurnState>(rng.uniform_int(0, 3)));
        }
        auto c = evalkit::confusion(preds, labels, B);
        CHECK(c.total() == n); // (tp+tn) + (fp+fn) partitions the set

        // permuting the pairs leaves every count unchanged
        std::vector<std::size_t> perm(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        std::vector<TurnState> preds2, labels2;
        for (std::size_t i : perm) {
            preds2.push_back(preds[i]);
            labels2.push_back(labels[i]);
        }
        auto c2 = evalkit::confusion(preds2, labels2, B);
        CHECK(c.tp == c2.tp);
        CHECK(c.tn == c2.tn);
        CHECK(c.fp == c2.fp);
        CHECK(c.fn == c2.fn);
    }
}

TEST_CASE("edit_error_rate basics and oracles") {
    CHECK(evalkit::edit_error_rate({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(evalkit::edit_error_rate({1}, {1, 2}) == 0.5); // one deletion
    CHECK_THROWS(evalkit::edit_error_rate({1}, {}));

    nn::Rng rng(2);
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<int> a, b;
        const int na = static_cast<int>(rng.uniform_int(0, 6));
        const int nb = static_cast<int>(rng.uniform_int(1, 6));
        for (int i = 0; i < na; ++i) a.push_back(static_cast<int>(rng.uniform_int(0, 2)));
        for (int i = 0; i < nb; ++i) b.push_back(static_cast<int>(rng.uniform_int(0, 2)));
        const long lev = evalkit::levenshtein(a, b);
        CHECK(lev == testutil::edit_recursive_oracle(a, b));
        CHECK(lev == testutil::edit_full_dp_oracle(a, b));
        // rate(x,x)=0 and rate(x,y)>0 iff x!=y
        CHECK(evalkit::edit_error_rate(b, b) == 0.0);
        if (a != b) CHECK(evalkit::edit_error_rate(a, b) > 0.0);
    }
}

TEST_CASE("report: formatting, json round trip, missing classes") {
    CHECK(evalkit::pct(0.8) == "80.00");
    CHECK(evalkit::pct(0.12345) == "12.35");
    CHECK(evalkit::pct(1.0) == "100.00");

    evalkit::Report r;
    r.mode = "unified";
    r.test_set = "toy";
    r.overall_acc = 0.95;
    r.mean_latency_ms = 12.5;
    r.n_samples = 40;
    r.classes.push_back({"complete", 0.9, 0.1, 0.05, 10});
    r.classes.push_back({"wait", std::nullopt, std::nullopt, 0.0, 0});

    evalkit::Report back = evalkit::Report::from_json_text(r.to_json_text());
    CHECK(back.mode == r.mode);
    CHECK(back.overall_acc == r.overall_acc);
    CHECK(back.classes.size() == 2);
    CHECK(*back.classes[0].acc == 0.9);
    CHECK_FALSE(back.classes[1].acc.has_value());

    const std::string table = r.render_table();
    CHECK(table.find("80.00") == std::string::npos);
    CHECK(table.find("90.00") != std::string::npos);
    CHECK(table.find("n/a") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "fastturn_report_test";
    std::filesystem::create_directories(dir);
    evalkit::emit_report(r, (dir / "rep").string());
    std::ifstream in(dir / "rep.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(evalkit::Report::from_json_text(text).n_samples == 40);

    evalkit::Report empty;
    CHECK_THROWS(evalkit::emit_report(empty, (dir / "bad").string()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("latency stats include mean, p50, p95") {
    auto st = evalkit::latency_stats({10.0, 20.0, 30.0, 40.0, 50.0});
    CHECK(st.mean == 30.0);
    CHECK(st.p50 == 30.0);
    CHECK(st.p95 == doctest::Approx(48.0));
    CHECK(st.n == 5);
}
