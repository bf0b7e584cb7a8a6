#include "cxrssl/losses.hpp"

#include <string>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl::ssl {

namespace {

void require_finite(const torch::Tensor& t, const char* what) {
    if (!torch::isfinite(t).all().item<bool>()) {
        throw NumericError(std::string(what) + " contains non-finite values");
    }
}

void require_matrix(const torch::Tensor& t, const char* what) {
    if (!t.defined() || t.dim() != 2) {
        throw ShapeError(std::string(what) + " must be a (B, D) matrix");
    }
}

torch::Tensor normalized_rows(const torch::Tensor& x, const char* what) {
    auto norms = x.norm(2, 1, /*keepdim=*/true);
    if ((norms == 0).any().item<bool>()) {
        throw ShapeError(std::string(what) + " has a zero-norm row");
    }
    return x / norms;
}

}  // namespace

void validate(const DinoConfig& cfg) {
    if (cfg.out_dim <= 0 || cfg.hidden_dim <= 0 || cfg.bottleneck_dim <= 0) {
        throw ConfigError("dino: head sizes must be positive");
    }
    if (!(cfg.tau_student > 0.0) || !(cfg.tau_teacher > 0.0)) {
        throw ConfigError("dino: temperatures must be positive");
    }
    const bool sharper = cfg.tau_teacher < cfg.tau_student;
    const bool equal_ok = cfg.allow_equal_temperatures && cfg.tau_teacher == cfg.tau_student;
    if (!sharper && !equal_ok) {
        throw ConfigError("dino: tau_teacher must be smaller than tau_student");
    }
    for (const double m : {cfg.teacher_momentum, cfg.center_momentum}) {
        if (!(m >= 0.0 && m <= 1.0)) {
            throw ConfigError("dino: momenta must lie in [0, 1]");
        }
    }
}

torch::Tensor dino_loss(const TwoViews& student_logits, const TwoViews& teacher_logits, const torch::Tensor& center,
                        const DinoConfig& cfg) {
    for (int v = 0; v < 2; ++v) {
        require_matrix(student_logits[v], "student logits");
        require_matrix(teacher_logits[v], "teacher logits");
        if (student_logits[v].sizes() != student_logits[0].sizes() ||
            teacher_logits[v].sizes() != student_logits[0].sizes()) {
            throw ShapeError("dino_loss: all views must share the (B, K) shape");
        }
        require_finite(student_logits[v], "student logits");
        require_finite(teacher_logits[v], "teacher logits");
    }
    const auto k = student_logits[0].size(1);
    if (center.dim() != 1 || center.size(0) != k) {
        throw ShapeError("dino_loss: center has " + std::to_string(center.numel()) + " entries, logits have K=" +
                         std::to_string(k));
    }
    require_finite(center, "center");

    torch::Tensor total;
    for (int t = 0; t < 2; ++t) {
        const auto targets = torch::softmax((teacher_logits[t].detach() - center.detach()) / cfg.tau_teacher, -1);
        const auto log_probs = torch::log_softmax(student_logits[1 - t] / cfg.tau_student, -1);
        auto term = -(targets * log_probs).sum(-1).mean();
        total = total.defined() ? total + term : term;
    }
    return total / 2.0;
}

torch::Tensor update_center(const torch::Tensor& center, const torch::Tensor& teacher_logits, double momentum) {
    torch::NoGradGuard guard;
    require_matrix(teacher_logits, "teacher logits");
    if (teacher_logits.size(0) == 0) {
        throw ShapeError("update_center: empty batch");
    }
    if (center.dim() != 1 || center.size(0) != teacher_logits.size(1)) {
        throw ShapeError("update_center: center/logit width mismatch");
    }
    const auto batch_mean = teacher_logits.mean(0);
    return center * momentum + batch_mean * (1.0 - momentum);
}

double softmax_entropy(const torch::Tensor& logits, const torch::Tensor& center, double tau) {
    torch::NoGradGuard guard;
    const auto log_p = torch::log_softmax((logits - center) / tau, -1);
    return (-(log_p.exp() * log_p).sum(-1)).mean().item<double>();
}

void ema_update(std::vector<torch::Tensor>& teacher, const std::vector<torch::Tensor>& student, double momentum) {
    if (teacher.size() != student.size()) {
        throw ShapeError("ema_update: parameter lists differ in length");
    }
    torch::NoGradGuard guard;
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        if (teacher[i].sizes() != student[i].sizes()) {
            throw ShapeError("ema_update: shape mismatch at leaf " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        teacher[i].copy_(teacher[i] * momentum + student[i] * (1.0 - momentum));
    }
}

void ema_update(torch::nn::Module& teacher, const torch::nn::Module& student, double momentum) {
    const auto student_params = student.named_parameters();
    std::vector<torch::Tensor> t_leaves;
    std::vector<torch::Tensor> s_leaves;
    for (auto& item : teacher.named_parameters()) {
        const auto* s = student_params.find(item.key());
        if (s == nullptr) {
            throw ShapeError("ema_update: student has no parameter '" + item.key() + "'");
        }
        t_leaves.push_back(item.value());
        s_leaves.push_back(*s);
    }
    ema_update(t_leaves, s_leaves, momentum);
}

torch::Tensor simclr_loss(const torch::Tensor& projections, double temperature) {
    require_matrix(projections, "projections");
    const auto n = projections.size(0);
    if (n % 2 != 0) {
        throw ShapeError("simclr_loss: expected 2B rows");
    }
    const auto b = n / 2;
    if (b < 2) {
        throw ShapeError("simclr_loss: need at least 2 images per batch for negatives");
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("simclr_loss: temperature must be positive");
    }
    const auto z = normalized_rows(projections, "projections");
    auto sim = z.matmul(z.t()) / temperature;
    const auto self = torch::eye(n, torch::TensorOptions().dtype(torch::kBool));
    sim = sim.masked_fill(self, -std::numeric_limits<double>::infinity());
    const auto idx = torch::arange(n, torch::kInt64);
    const auto positives = torch::remainder(idx + b, n);
    return torch::nn::functional::cross_entropy(sim, positives);
}

torch::Tensor byol_loss(const torch::Tensor& online_pred, const torch::Tensor& target_proj) {
    require_matrix(online_pred, "online predictions");
    require_matrix(target_proj, "target projections");
    if (online_pred.sizes() != target_proj.sizes()) {
        throw ShapeError("byol_loss: prediction/target shape mismatch");
    }
    const auto p = normalized_rows(online_pred, "online predictions");
    const auto z = normalized_rows(target_proj.detach(), "target projections");
    return (p - z).pow(2).sum(1).mean();
}

torch::Tensor byol_loss(const TwoViews& online_pred, const TwoViews& target_proj) {
    return (byol_loss(online_pred[0], target_proj[1]) + byol_loss(online_pred[1], target_proj[0])) / 2.0;
}

torch::Tensor negative_cosine(const torch::Tensor& pred, const torch::Tensor& proj) {
    require_matrix(pred, "predictions");
    require_matrix(proj, "projections");
    if (pred.sizes() != proj.sizes()) {
        throw ShapeError("negative_cosine: shape mismatch");
    }
    const auto p = normalized_rows(pred, "predictions");
    const auto z = normalized_rows(proj.detach(), "projections");
    return -(p * z).sum(1).mean();
}

torch::Tensor simsiam_loss(const TwoViews& pred, const TwoViews& proj) {
    return (negative_cosine(pred[0], proj[1]) + negative_cosine(pred[1], proj[0])) / 2.0;
}

}  // namespace cxrssl::ssl
