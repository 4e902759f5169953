#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastturn/fusion/fusion.hpp"
#include "fastturn/lm/lm.hpp"
#include "fastturn/nn/kernels.hpp"
#include "fastturn/nn/gradcheck.hpp"
#include "testutil.hpp"

using namespace fastturn;
using nn::ParameterSet;
using nn::Tensor;
using testutil::random_tensor;

static lm::LmConfig small_lm(int vocab) {
    lm::LmConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.model_dim = 32;
    cfg.max_positions = 64;
    cfg.vocab_size = vocab;
    return cfg;
}

TEST_CASE("lm_forward: shapes, normalization, determinism") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    ParameterSet ps;
    lm::init_lm_params(ps, cfg, nn::Rng(1));

    lm::LmOut out = lm::lm_forward(ps, cfg, {vocab.bos()}, nullptr);
    CHECK(out.logits.shape == std::vector<int>{1, vocab.size()});
    CHECK(out.final_hidden.shape == std::vector<int>{1, cfg.model_dim});
    // softmax of the logits is a valid distribution
    std::vector<double> probs(static_cast<std::size_t>(vocab.size()));
    nn::kernels::softmax_row(probs.data(), out.logits.row(0), vocab.size());
    double s = 0.0;
    for (double p : probs) {
        CHECK(p >= 0.0);
        s += p;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    lm::LmOut out2 = lm::lm_forward(ps, cfg, {vocab.bos()}, nullptr);
    CHECK(out.logits.v == out2.logits.v);

    // position overflow
    std::vector<int> too_long(65, vocab.bos());
    CHECK_THROWS(lm::lm_forward(ps, cfg, too_long, nullptr));
}

TEST_CASE("permuting prefix embeddings changes the outputs") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    ParameterSet ps;
    lm::init_lm_params(ps, cfg, nn::Rng(2));
    nn::Rng rng(3);
    Tensor prefix = random_tensor({4, cfg.model_dim}, rng);
    Tensor permuted = prefix;
    for (int j = 0; j < cfg.model_dim; ++j) {
        std::swap(permuted.at(0, j), permuted.at(3, j));
        std::swap(permuted.at(1, j), permuted.at(2, j));
    }
    lm::LmOut a = lm::lm_forward(ps, cfg, {vocab.bos()}, &prefix);
    lm::LmOut b = lm::lm_forward(ps, cfg, {vocab.bos()}, &permuted);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.logits.v.size(); ++i) diff += std::abs(a.logits.v[i] - b.logits.v[i]);
    CHECK(diff > 1e-6); // the prefix is not pooled away
}

TEST_CASE("adapt_acoustic: shape preservation and empty input") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    lm::LlmAdapterConfig acfg;
    acfg.num_layers = 2;
    acfg.num_heads = 2;
    ParameterSet ps;
    lm::init_llm_adapter_params(ps, acfg, 16, cfg.model_dim, nn::Rng(4));
    nn::Rng rng(5);

    Tensor empty = Tensor::zeros({0, 16});
    CHECK(lm::adapt_acoustic(ps, acfg, cfg.model_dim, empty).rows() == 0);

    Tensor seven = random_tensor({7, 16}, rng);
    Tensor out = lm::adapt_acoustic(ps, acfg, cfg.model_dim, seven);
    CHECK(out.shape == std::vector<int>{7, cfg.model_dim});
}

TEST_CASE("gradient flows through adapter composed with the LM") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    cfg.num_layers = 1;
    lm::LlmAdapterConfig acfg;
    acfg.num_layers = 1;
    acfg.num_heads = 2;
    ParameterSet ps;
    lm::init_lm_params(ps, cfg, nn::Rng(6));
    lm::init_llm_adapter_params(ps, acfg, 8, cfg.model_dim, nn::Rng(7));
    nn::Rng rng(8);
    const Tensor top = random_tensor({3, 8}, rng);
    const std::vector<int> tokens = {vocab.ctc_open(), 0, vocab.ctc_close()};

    auto forward = [&](const ParameterSet& p, bool train, nn::GradMap* out) {
        nn::Tape t;
        nn::ParamVars pv(t, p, train);
        nn::Var prefix = lm::adapt_acoustic_node(t, pv, acfg, cfg.model_dim, t.leaf(top));
        lm::LmNodes nodes = lm::lm_forward_node(t, pv, cfg, tokens, prefix);
        const int n = t.val(nodes.logits).shape[0];
        nn::Var last = t.slice_rows(nodes.logits, n - 1, 1);
        nn::Var l = t.cross_entropy(last, {vocab.turn_token(data::TurnState::Complete)});
        if (train) {
            t.backward(l);
            *out = pv.collect_grads();
        }
        return t.val(l).v[0];
    };
    auto loss = [&](const ParameterSet& p) { return forward(p, false, nullptr); };
    auto grads = [&](const ParameterSet& p) {
        nn::GradMap g;
        forward(p, true, &g);
        return g;
    };
    auto rep = nn::grad_check(loss, grads, ps, 1e-5, 1e-4);
    INFO("worst " << rep.worst_param << " err " << rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("predict_turn always lands in the 4-state set and tolerates degenerate input") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    ParameterSet ps;
    lm::init_lm_params(ps, cfg, nn::Rng(9));
    nn::Rng rng(10);

    // empty prompt, no prefix
    lm::TurnPrediction p0 = lm::predict_turn(ps, cfg, vocab, {}, nullptr);
    CHECK(static_cast<int>(p0.state) >= 0);
    CHECK(static_cast<int>(p0.state) < 4);
    CHECK(p0.confidence > 0.0);
    CHECK(p0.confidence <= 1.0);

    // deterministic
    lm::TurnPrediction p1 = lm::predict_turn(ps, cfg, vocab, {}, nullptr);
    CHECK(p0.state == p1.state);
    CHECK(p0.confidence == p1.confidence);

    // restricted-argmax invariance: scaling all four turn logits by a shared
    // temperature never changes the argmax
    for (int rep = 0; rep < 50; ++rep) {
        std::array<double, 4> logits{};
        for (double& v : logits) v = rng.uniform(-3.0, 3.0);
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
        const double temp = rng.uniform(0.05, 5.0);
        int best_scaled = 0;
        for (int i = 1; i < 4; ++i)
            if (logits[static_cast<std::size_t>(i)] * temp > logits[static_cast<std::size_t>(best_scaled)] * temp)
                best_scaled = i;
        CHECK(best == best_scaled);
    }

    // malformed prompts are rejected
    CHECK_THROWS(lm::predict_turn(ps, cfg, vocab, {vocab.ctc_open()}, nullptr));
    CHECK_THROWS(lm::predict_turn(ps, cfg, vocab, {vocab.ctc_open(), vocab.ctc_open(), vocab.ctc_close(), vocab.ctc_close()}, nullptr));
}

TEST_CASE("lm_decode_asr: max_len 0, determinism, prefix required") {
    lm::Vocab vocab(6);
    lm::LmConfig cfg = small_lm(vocab.size());
    ParameterSet ps;
    lm::init_lm_params(ps, cfg, nn::Rng(11));
    lm::LlmAdapterConfig acfg;
    nn::Rng rng(12);
    Tensor prefix = random_tensor({3, cfg.model_dim}, rng);

    CHECK(lm::lm_decode_asr(ps, cfg, vocab, prefix, 0).empty());
    auto a = lm::lm_decode_asr(ps, cfg, vocab, prefix, 8);
    auto b = lm::lm_decode_asr(ps, cfg, vocab, prefix, 8);
    CHECK(a == b);
    Tensor empty = Tensor::zeros({0, cfg.model_dim});
    CHECK_THROWS(lm::lm_decode_asr(ps, cfg, vocab, empty, 8));
}

TEST_CASE("acoustic_adapt: mean of one, duplication invariance, gradients") {
    fusion::AcousticAdapterConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.model_dim = 16;
    ParameterSet ps;
    fusion::init_acoustic_adapter_params(ps, cfg, 8, nn::Rng(13));
    nn::Rng rng(14);

    // pooled output of a length-1 input equals that single transformed row
    const Tensor one = random_tensor({1, 8}, rng);
    {
        nn::Tape t;
        nn::ParamVars pv(t, ps, false);
        nn::Var x = nn::affine(t, t.leaf(one), pv("acoustic_adapter.in.w"), pv("acoustic_adapter.in.b"));
        nn::TransformerDims dims{cfg.num_layers, cfg.num_heads, cfg.model_dim, cfg.ffn_mult};
        nn::Var rows = nn::transformer_forward(t, pv, "acoustic_adapter.", dims, x);
        const Tensor pooled = fusion::acoustic_adapt(ps, cfg, one);
        for (int j = 0; j < cfg.model_dim; ++j)
            CHECK(pooled.at(0, j) == doctest::Approx(t.val(rows).at(0, j)).epsilon(1e-15));
    }

    // [x;x] pools to the same vector as [x] (position-free configuration)
    Tensor x1 = random_tensor({1, 8}, rng);
    Tensor x2 = Tensor::zeros({2, 8});
    for (int j = 0; j < 8; ++j) x2.at(0, j) = x2.at(1, j) = x1.at(0, j);
    const Tensor p1 = fusion::acoustic_adapt(ps, cfg, x1);
    const Tensor p2 = fusion::acoustic_adapt(ps, cfg, x2);
    for (int j = 0; j < cfg.model_dim; ++j)
        CHECK(p1.at(0, j) == doctest::Approx(p2.at(0, j)).epsilon(1e-12));

    CHECK_THROWS(fusion::acoustic_adapt(ps, cfg, Tensor::zeros({0, 8})));
}

TEST_CASE("detect_turn: normalization, degenerate input, shift invariance, ablation") {
    fusion::AcousticAdapterConfig acfg;
    acfg.model_dim = 16;
    fusion::DetectorConfig dcfg;
    dcfg.hidden1 = 16;
    dcfg.hidden2 = 8;
    ParameterSet ps;
    fusion::init_detector_params(ps, dcfg, 16 + 32, nn::Rng(15));
    nn::Rng rng(16);

    const Tensor ac = random_tensor({1, 16}, rng);
    const Tensor lmh = random_tensor({1, 32}, rng);
    auto probs = fusion::detect_turn(ps, ac, lmh);
    double s = 0.0;
    for (double p : probs) s += p;
    CHECK(std::abs(s - 1.0) < 1e-12);

    // zero vectors still produce a valid distribution
    auto pz = fusion::detect_turn(ps, Tensor::zeros({1, 16}), Tensor::zeros({1, 32}));
    s = 0.0;
    for (double p : pz) s += p;
    CHECK(std::abs(s - 1.0) < 1e-12);

    // argmax invariant under adding a constant to all four logits
    for (int rep = 0; rep < 50; ++rep) {
        std::array<double, 4> l{};
        for (double& v : l) v = rng.uniform(-2, 2);
        const double c = rng.uniform(-10, 10);
        int b1 = 0, b2 = 0;
        for (int i = 1; i < 4; ++i) {
            if (l[static_cast<std::size_t>(i)] > l[static_cast<std::size_t>(b1)]) b1 = i;
            if (l[static_cast<std::size_t>(i)] + c > l[static_cast<std::size_t>(b2)] + c) b2 = i;
        }
        CHECK(b1 == b2);
    }

    // LM branch zero-ablated: still a valid distribution
    auto pa = fusion::detect_turn(ps, ac, Tensor::zeros({1, 32}));
    s = 0.0;
    for (double p : pa) s += p;
    CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("detector and acoustic adapter gradients") {
    fusion::AcousticAdapterConfig acfg;
    acfg.num_layers = 1;
    acfg.num_heads = 2;
    acfg.model_dim = 16;
    fusion::DetectorConfig dcfg;
    dcfg.hidden1 = 8;
    dcfg.hidden2 = 8;
    ParameterSet ps;
    fusion::init_acoustic_adapter_params(ps, acfg, 8, nn::Rng(17));
    fusion::init_detector_params(ps, dcfg, 16 + 12, nn::Rng(18));
    nn::Rng rng(19);
    const Tensor mid = random_tensor({4, 8}, rng);
    const Tensor lmh = random_tensor({1, 12}, rng);

    auto forward = [&](const ParameterSet& p, bool train, nn::GradMap* out) {
        nn::Tape t;
        nn::ParamVars pv(t, p, train);
        nn::Var ac = fusion::acoustic_adapt_node(t, pv, acfg, t.leaf(mid));
        nn::Var logits = fusion::detector_logits_node(t, pv, ac, t.leaf(lmh));
        nn::Var l = t.cross_entropy(logits, {2});
        if (train) {
            t.backward(l);
            *out = pv.collect_grads();
        }
        return t.val(l).v[0];
    };
    auto loss = [&](const ParameterSet& p) { return forward(p, false, nullptr); };
    auto grads = [&](const ParameterSet& p) {
        nn::GradMap g;
        forward(p, true, &g);
        return g;
    };
    auto rep = nn::grad_check(loss, grads, ps, 1e-5, 1e-4);
    INFO("worst " << rep.worst_param << " err " << rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("vocab json round trip") {
    lm::Vocab v(7);
    lm::Vocab back = lm::Vocab::from_json(v.to_json());
    CHECK(back.size() == v.size());
    CHECK(back.turn_token(data::TurnState::Wait) == v.turn_token(data::TurnState::Wait));
    CHECK(v.text_of(v.ctc_open()) == "<ctc>");
    CHECK(v.is_special(v.eos()));
    CHECK_FALSE(v.is_special(0));
}
