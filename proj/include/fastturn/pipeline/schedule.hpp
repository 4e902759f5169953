#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastturn/lm/vocab.hpp"
#include "fastturn/nn/rng.hpp"

namespace fastturn::pipeline {

// One training stage: learning rate with linear warmup, a step budget, the
// parameter prefixes left frozen, and the objective the stage optimizes.
struct StageSchedule {
    std::string stage_id;  // "1a", "1b", "2", "3", "4"
    double lr = 1e-3;
    int warmup_steps = 0;
    int total_steps = 100;
    std::vector<std::string> frozen; // parameter-path prefixes kept frozen
    std::string objective;           // ctc_asr | lm_text_turn | adapter_asr | joint_turn | fusion_turn

    void validate() const;
};

struct TrainConfig {
    double prompt_dropout_p = 0.3; // must stay strictly below 0.5
    int batch_size = 8;
    std::uint64_t seed = 12345;
    StageSchedule stage1a{"1a", 2e-3, 50, 600, {}, "ctc_asr"};
    StageSchedule stage1b{"1b", 2e-3, 0, 5000, {}, "lm_text_turn"};
    StageSchedule stage2{"2", 2e-3, 0, 2400, {}, "adapter_asr"};
    StageSchedule stage3{"3", 5e-4, 0, 500, {}, "joint_turn"};
    StageSchedule stage4{"4", 1e-3, 0, 500, {}, "fusion_turn"};

    void validate() const;
};

// lr ramps linearly over the warmup then holds; step is 1-based.
double warmup_lr(double base_lr, int step, int warmup_steps);

// the full per-step schedule: the warmup ramp, then linear decay from the
// base rate down to 10% of it at total_steps
double schedule_lr(const StageSchedule& sched, int step);

// With probability p the prompt collapses to its markers-only form.
std::vector<int> apply_prompt_dropout(const std::vector<int>& prompt, double p, nn::Rng& rng,
                                      const lm::Vocab& vocab);

} // namespace fastturn::pipeline
