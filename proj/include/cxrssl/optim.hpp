#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <torch/nn/module.h>
#include <torch/types.h>

namespace cxrssl::optim {

enum class OptimizerKind { adam, sgd, lars };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double momentum = 0.9;            ///< sgd, lars
    double beta1 = 0.9;               ///< adam
    double beta2 = 0.999;             ///< adam
    double eps = 1e-8;                ///< adam
    double trust_coefficient = 1e-3;  ///< lars

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct NamedParameter {
    std::string name;
    torch::Tensor value;
    /// Biases and normalization scales/shifts: no weight decay and no LARS adaptation.
    bool exempt = false;
};

/// Rank <= 1 tensors (biases, norm parameters) are exempt from decay and trust scaling.
bool is_decay_exempt(const torch::Tensor& param);

/// Trainable parameters of `module` (requires_grad only), in registration order.
std::vector<NamedParameter> trainable_parameters(const torch::nn::Module& module);

/// First-order optimizers with per-step learning rate and weight decay.
///
///  - adam: bias-corrected Adam with decoupled weight decay (p <- p - lr*wd*p).
///  - sgd: heavy-ball momentum on g + wd*p.
///  - lars: momentum on lr * trust * (g + wd*p) with trust = eta*|p| / |g + wd*p|;
///    exempt tensors use trust 1 and no decay.
///
/// Tensors whose gradient is undefined are skipped.
class Optimizer {
public:
    Optimizer(std::vector<NamedParameter> params, OptimizerConfig cfg);

    void zero_grad();
    void step(double learning_rate, double weight_decay);

    std::int64_t step_count() const noexcept { return steps_; }
    const OptimizerConfig& config() const noexcept { return cfg_; }
    const std::vector<NamedParameter>& parameters() const noexcept { return params_; }

    /// Moments/buffers as `prefix + name + ".m"|".v"|".buf"` plus `prefix + "step"`.
    void export_state(std::map<std::string, torch::Tensor>& out, const std::string& prefix) const;
    void import_state(const std::map<std::string, torch::Tensor>& in, const std::string& prefix);

private:
    std::vector<NamedParameter> params_;
    OptimizerConfig cfg_;
    std::vector<torch::Tensor> first_;
    std::vector<torch::Tensor> second_;
    std::int64_t steps_ = 0;
};

}  // namespace cxrssl::optim
