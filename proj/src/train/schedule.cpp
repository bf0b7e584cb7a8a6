#include <cmath>
#include <numbers>

#include "cxrssl/errors.hpp"
#include "cxrssl/train.hpp"

namespace cxrssl::train {

double lr_schedule(std::int64_t step, std::int64_t total_steps, const LrSchedule& cfg) {
    if (total_steps < 1 || step < 0 || step >= total_steps) {
        throw ConfigError("lr_schedule: step must lie in [0, total_steps)");
    }
    if (step < cfg.warmup_steps) {
        return cfg.base_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    }
    if (cfg.policy == LrPolicy::constant) {
        return cfg.base_lr;
    }
    const double t = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(total_steps - cfg.warmup_steps);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double wd_schedule(std::int64_t step, std::int64_t total_steps, double wd_start, double wd_end) {
    if (total_steps < 1 || step < 0 || step >= total_steps) {
        throw ConfigError("wd_schedule: step must lie in [0, total_steps)");
    }
    if (total_steps == 1 || wd_start == wd_end) {
        return wd_start;
    }
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return wd_start * (1.0 - t) + wd_end * t;
}

}  // namespace cxrssl::train
