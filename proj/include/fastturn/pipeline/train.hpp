#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fastturn/engine.hpp"
#include "fastturn/pipeline/schedule.hpp"

namespace fastturn::pipeline {

struct TrainLogEntry {
    std::string stage;
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double timestamp_ms = 0.0; // wall clock, ms since epoch
};

using LogSink = std::function<void(const TrainLogEntry&)>;

// Stage 1a: encoder + CTC head under the CTC objective.
void run_stage1a(Engine& eng, const std::vector<data::Sample>& corpus, const StageSchedule& sched,
                 int batch_size, std::uint64_t seed, const LogSink& log);

// Stage 1b: LM alone on text-only (prompt tokens -> turn special token).
void run_stage1b(Engine& eng, const std::vector<data::Sample>& corpus, const StageSchedule& sched,
                 int batch_size, std::uint64_t seed, const LogSink& log);

// Both half-stages, 1a then 1b (they share no parameters).
void run_stage1(Engine& eng, const std::vector<data::Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log);

// Stage 2: LLM adapter alone under the ASR next-token objective.
void run_stage2(Engine& eng, const std::vector<data::Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log);

// Stage 3: LM + LLM adapter jointly on the turn token, with prompt dropout.
void run_stage3(Engine& eng, const std::vector<data::Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log);

// Stage 4: acoustic adapter + turn detector on the fusion objective.
void run_stage4(Engine& eng, const std::vector<data::Sample>& corpus, const TrainConfig& cfg,
                const LogSink& log);

void run_all_stages(Engine& eng, const std::vector<data::Sample>& corpus, const TrainConfig& cfg,
                    const LogSink& log);

// Trainable-prefix sets per stage (the complement is the freeze mask).
std::vector<std::string> stage_trainable_prefixes(const std::string& stage_id);

} // namespace fastturn::pipeline
