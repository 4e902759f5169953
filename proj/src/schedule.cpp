#include "fastturn/pipeline/schedule.hpp"

#include "fastturn/common.hpp"
#include <algorithm>
#include <cmath>

#include "fastturn/ctc/ctc.hpp"

namespace fastturn::pipeline {

void StageSchedule::validate() const {
    if (lr <= 0.0) throw ConfigError("stage " + stage_id + ": lr must be positive");
    if (warmup_steps < 0 || total_steps < 1 || warmup_steps > total_steps)
        throw ConfigError("stage " + stage_id + ": need 0 <= warmup_steps <= total_steps, total_steps >= 1");
}

void TrainConfig::validate() const {
    if (prompt_dropout_p < 0.0 || prompt_dropout_p >= 0.5)
        throw ConfigError("training: prompt_dropout_p must satisfy 0 <= p < 0.5");
    if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
    stage1a.validate();
    stage1b.validate();
    stage2.validate();
    stage3.validate();
    stage4.validate();
}

double warmup_lr(double base_lr, int step, int warmup_steps) {
    if (warmup_steps <= 0 || step >= warmup_steps) return base_lr;
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

double schedule_lr(const StageSchedule& sched, int step) {
    if (sched.warmup_steps > 0 && step < sched.warmup_steps)
        return warmup_lr(sched.lr, step, sched.warmup_steps);
    const int span = sched.total_steps - sched.warmup_steps;
    if (span <= 0) return sched.lr;
    const double frac = static_cast<double>(step - sched.warmup_steps) / static_cast<double>(span);
    return sched.lr * (1.0 - 0.9 * std::min(1.0, std::max(0.0, frac)));
}

std::vector<int> apply_prompt_dropout(const std::vector<int>& prompt, double p, nn::Rng& rng,
                                      const lm::Vocab& vocab) {
    if (p < 0.0 || p >= 0.5) throw ConfigError("prompt dropout: p must satisfy 0 <= p < 0.5");
    if (p > 0.0 && rng.bernoulli(p)) return ctc::empty_ctc_prompt(vocab);
    return prompt;
}

} // namespace fastturn::pipeline
