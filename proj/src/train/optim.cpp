#include "cxrssl/optim.hpp"

#include <cmath>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl::optim {

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::lars: return "lars";
    }
    throw ConfigError("unknown optimizer kind");
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "lars") return OptimizerKind::lars;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam|sgd|lars)");
}

bool is_decay_exempt(const torch::Tensor& param) {
    return param.dim() <= 1;
}

std::vector<NamedParameter> trainable_parameters(const torch::nn::Module& module) {
    std::vector<NamedParameter> out;
    for (const auto& item : module.named_parameters()) {
        if (item.value().requires_grad()) {
            out.push_back({item.key(), item.value(), is_decay_exempt(item.value())});
        }
    }
    return out;
}

Optimizer::Optimizer(std::vector<NamedParameter> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (const auto& p : params_) {
        first_.push_back(torch::zeros_like(p.value));
        second_.push_back(cfg_.kind == OptimizerKind::adam ? torch::zeros_like(p.value) : torch::Tensor());
    }
}

void Optimizer::zero_grad() {
    for (auto& p : params_) {
        auto& g = p.value.mutable_grad();
        if (g.defined()) {
            g = torch::Tensor();
        }
    }
}

void Optimizer::step(double learning_rate, double weight_decay) {
    torch::NoGradGuard guard;
    ++steps_;
    const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& param = params_[i].value;
        const auto& grad = param.grad();
        if (!grad.defined()) {
            continue;
        }
        const double wd = params_[i].exempt ? 0.0 : weight_decay;
        switch (cfg_.kind) {
            case OptimizerKind::adam: {
                auto& m = first_[i];
                auto& v = second_[i];
                m.mul_(cfg_.beta1).add_(grad, 1.0 - cfg_.beta1);
                v.mul_(cfg_.beta2).addcmul_(grad, grad, 1.0 - cfg_.beta2);
                if (wd != 0.0) {
                    param.mul_(1.0 - learning_rate * wd);
                }
                auto denom = (v / bias2).sqrt_().add_(cfg_.eps);
                param.addcdiv_(m, denom, -learning_rate / bias1);
                break;
            }
            case OptimizerKind::sgd: {
                auto d = wd != 0.0 ? grad + wd * param : grad;
                first_[i].mul_(cfg_.momentum).add_(d);
                param.add_(first_[i], -learning_rate);
                break;
            }
            case OptimizerKind::lars: {
                auto d = wd != 0.0 ? grad + wd * param : grad.clone();
                double trust = 1.0;
                if (!params_[i].exempt) {
                    const double pn = param.norm().item<double>();
                    const double dn = d.norm().item<double>();
                    if (pn > 0.0 && dn > 0.0) {
                        trust = cfg_.trust_coefficient * pn / dn;
                    }
                }
                first_[i].mul_(cfg_.momentum).add_(d, learning_rate * trust);
                param.sub_(first_[i]);
                break;
            }
        }
    }
}

void Optimizer::export_state(std::map<std::string, torch::Tensor>& out, const std::string& prefix) const {
    out[prefix + "step"] = torch::tensor(steps_, torch::kInt64);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& name = params_[i].name;
        if (cfg_.kind == OptimizerKind::adam) {
            out[prefix + name + ".m"] = first_[i].clone();
            out[prefix + name + ".v"] = second_[i].clone();
        } else {
            out[prefix + name + ".buf"] = first_[i].clone();
        }
    }
}

void Optimizer::import_state(const std::map<std::string, torch::Tensor>& in, const std::string& prefix) {
    auto fetch = [&](const std::string& key, torch::Tensor& target) {
        const auto it = in.find(key);
        if (it == in.end()) {
            throw ArtifactError("optimizer state is missing '" + key + "'");
        }
        if (it->second.sizes() != target.sizes()) {
            throw ArtifactError("optimizer state '" + key + "' has the wrong shape");
        }
        target.copy_(it->second);
    };
    const auto step_it = in.find(prefix + "step");
    if (step_it == in.end()) {
        throw ArtifactError("optimizer state is missing '" + prefix + "step'");
    }
    steps_ = step_it->second.item<std::int64_t>();
    torch::NoGradGuard guard;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& name = params_[i].name;
        if (cfg_.kind == OptimizerKind::adam) {
            fetch(prefix + name + ".m", first_[i]);
            fetch(prefix + name + ".v", second_[i]);
        } else {
            fetch(prefix + name + ".buf", first_[i]);
        }
    }
}

}  // namespace cxrssl::optim
