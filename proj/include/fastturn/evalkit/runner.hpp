#pragma once

#include "fastturn/duplex/session.hpp"
#include "fastturn/evalkit/metrics.hpp"

namespace fastturn::evalkit {

struct EvalOutcome {
    Report report;
    std::vector<data::TurnState> predictions;
    std::vector<data::TurnState> labels;
    std::vector<double> latencies_ms;
    double early_rate = 0.0;
};

struct EvalOptions {
    bool early_exit = false; // offline segment classification by default
    double tau = 0.9;
    int k_consecutive = 2;
    int workers = 1;
    std::string test_set_name = "test";
};

// Drives one duplex session per sample and aggregates per-class metrics plus
// the 4-way accuracy. Deterministic in sample order.
EvalOutcome run_eval(const Engine& eng, EngineMode mode, const std::vector<data::Sample>& samples,
                     const EvalOptions& opt = {});

struct LatencyStats {
    double mean = 0.0, p50 = 0.0, p95 = 0.0;
    long n = 0;
};

LatencyStats latency_stats(std::vector<double> values);

struct BenchOutcome {
    LatencyStats unified;
    LatencyStats cascaded_ar; // cascade that must decode the transcript autoregressively first
    double unified_early_rate = 0.0;
    long n_samples = 0;
};

// Latency benchmark: Unified (streaming, early exit on) against a cascade
// that runs the LM's autoregressive ASR decode before deciding. Single
// worker; one pass per mode over the same samples in manifest order.
BenchOutcome bench_latency(const Engine& eng, const std::vector<data::Sample>& samples, double tau,
                           int k_consecutive, int asr_max_len = 32);

} // namespace fastturn::evalkit
