#include "fastturn/evalkit/runner.hpp"

#include <algorithm>
#include <cmath>

#include "fastturn/nn/kernels.hpp"

namespace fastturn::evalkit {

using data::Sample;
using data::TurnState;
using duplex::Session;
using duplex::SessionOptions;

namespace {

struct PerSample {
    TurnState pred;
    double latency = 0.0;
    bool early = false;
};

PerSample eval_one(const Engine& eng, EngineMode mode, const Sample& s, const EvalOptions& opt) {
    duplex::SteadyClock clock;
    SessionOptions so;
    so.mode = mode;
    so.tau = opt.tau;
    so.k_consecutive = opt.k_consecutive;
    so.early_exit = opt.early_exit;
    Session session(eng, so, clock);
    const int cf = eng.cfg.encoder.chunk_frames;
    const int fd = eng.cfg.encoder.feature_dim;
    for (int f = 0; f < s.features.num_frames; f += cf) {
        const int n = std::min(cf, s.features.num_frames - f);
        session.feed_frames(s.features.values.data() + static_cast<std::size_t>(f) * fd, n, clock.now_ms());
    }
    duplex::DecisionRecord rec = session.finalize_segment(clock.now_ms());
    return {rec.state, duplex::latency_ms(rec), rec.early};
}

} // namespace

EvalOutcome run_eval(const Engine& eng, EngineMode mode, const std::vector<Sample>& samples,
                     const EvalOptions& opt) {
    if (samples.empty()) throw ConfigError("run_eval: empty sample set");
    EvalOutcome out;
    out.predictions.resize(samples.size());
    out.labels.resize(samples.size());
    out.latencies_ms.resize(samples.size());
    std::vector<char> early(samples.size(), 0);

    const int workers = std::max(1, opt.workers);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
#endif
    for (std::size_t i = 0; i < samples.size(); ++i) {
        PerSample r = eval_one(eng, mode, samples[i], opt);
        out.predictions[i] = r.pred;
        out.labels[i] = samples[i].turn_state;
        out.latencies_ms[i] = r.latency;
        early[i] = r.early ? 1 : 0;
    }

    long correct = 0, n_early = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (out.predictions[i] == out.labels[i]) ++correct;
        n_early += early[i];
    }
    out.early_rate = static_cast<double>(n_early) / static_cast<double>(samples.size());

    Report& rep = out.report;
    rep.mode = to_string(mode);
    rep.test_set = opt.test_set_name;
    rep.n_samples = static_cast<long>(samples.size());
    rep.overall_acc = static_cast<double>(correct) / static_cast<double>(samples.size());
    double lat_sum = 0.0;
    for (double l : out.latencies_ms) lat_sum += l;
    rep.mean_latency_ms = lat_sum / static_cast<double>(samples.size());
    for (TurnState st : data::all_turn_states()) {
        const ConfusionCounts c = confusion(out.predictions, out.labels, st);
        ClassReport cr;
        cr.name = data::to_string(st);
        cr.acc = accuracy(c);
        cr.miss = miss_rate(c);
        cr.fa = false_alarm(c);
        cr.n = c.tp + c.fn;
        rep.classes.push_back(std::move(cr));
    }
    return out;
}

LatencyStats latency_stats(std::vector<double> values) {
    LatencyStats st;
    st.n = static_cast<long>(values.size());
    if (values.empty()) return st;
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    auto q = [&](double p) {
        const double idx = p * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(values.size() - 1, lo + 1);
        const double frac = idx - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    st.p50 = q(0.5);
    st.p95 = q(0.95);
    return st;
}

BenchOutcome bench_latency(const Engine& eng, const std::vector<Sample>& samples, double tau,
                           int k_consecutive, int asr_max_len) {
    if (samples.empty()) throw ConfigError("bench_latency: empty sample set");
    BenchOutcome out;
    out.n_samples = static_cast<long>(samples.size());

    std::vector<double> unified_lat, cascade_lat;
    long early = 0;
    for (const Sample& s : samples) {
        EvalOptions opt;
        opt.early_exit = true;
        opt.tau = tau;
        opt.k_consecutive = k_consecutive;
        PerSample r = eval_one(eng, EngineMode::Unified, s, opt);
        unified_lat.push_back(r.latency);
        if (r.early) ++early;
    }

    // Cascaded-with-autoregressive-ASR: stream the encoder, then at segment
    // end decode the transcript with the LM before predicting the turn.
    for (const Sample& s : samples) {
        duplex::SteadyClock clock;
        enc::StreamingEncoder senc(eng.params, eng.cfg.encoder);
        std::vector<double> top_rows;
        const int cf = eng.cfg.encoder.chunk_frames;
        const int fd = eng.cfg.encoder.feature_dim;
        int fed = 0;
        while (fed + cf <= s.features.num_frames) {
            auto o = senc.encode_chunk(s.features.values.data() + static_cast<std::size_t>(fed) * fd, cf, false);
            top_rows.insert(top_rows.end(), o.top.v.begin(), o.top.v.end());
            fed += cf;
        }
        auto o = senc.encode_chunk(s.features.values.data() + static_cast<std::size_t>(fed) * fd,
                                   s.features.num_frames - fed, true);
        top_rows.insert(top_rows.end(), o.top.v.begin(), o.top.v.end());
        const double t_end = clock.now_ms();

        const int d = eng.cfg.encoder.model_dim;
        const int n_rows = static_cast<int>(top_rows.size()) / d;
        const nn::Tensor top({n_rows, d}, std::move(top_rows));
        std::vector<int> transcript;
        if (top.rows() > 0) {
            const nn::Tensor prefix = eng.llm_prefix(top);
            const std::vector<int> decoded = eng.decode_asr(prefix, asr_max_len);
            for (int t : decoded)
                if (t > 0) transcript.push_back(t);
        }
        (void)eng.predict(ctc::format_ctc_prompt(transcript, eng.vocab), nullptr);
        cascade_lat.push_back(std::max(0.0, clock.now_ms() - t_end));
    }

    out.unified = latency_stats(std::move(unified_lat));
    out.cascaded_ar = latency_stats(std::move(cascade_lat));
    out.unified_early_rate = static_cast<double>(early) / static_cast<double>(samples.size());
    return out;
}

} // namespace fastturn::evalkit
