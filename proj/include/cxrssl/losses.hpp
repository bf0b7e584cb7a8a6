#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/types.h>

namespace cxrssl::ssl {

/// Self-distillation hyperparameters (temperatures, momenta, head sizes).
struct DinoConfig {
    std::int64_t out_dim = 64;          ///< K, number of prototypes
    std::int64_t hidden_dim = 64;       ///< projection head width
    std::int64_t bottleneck_dim = 32;   ///< L2-normalized bottleneck before the prototype layer
    double tau_student = 0.1;
    double tau_teacher = 0.04;
    double teacher_momentum = 0.996;
    double center_momentum = 0.9;
    /// Batch normalization after the two hidden layers of the projection head.
    bool head_batchnorm = false;
    /// Only for the no-sharpening ablation: permits tau_teacher == tau_student.
    bool allow_equal_temperatures = false;

    friend bool operator==(const DinoConfig&, const DinoConfig&) = default;
};

/// Throws ConfigError unless tau_teacher < tau_student (or equal when explicitly allowed),
/// both temperatures are positive and both momenta lie in [0, 1].
void validate(const DinoConfig& cfg);

/// Logits (or projections) of the two augmented views, each (B, K).
using TwoViews = std::array<torch::Tensor, 2>;

/// Two-view self-distillation cross-entropy:
///   1/2 * [H(Pt(v1), Ps(v2)) + H(Pt(v2), Ps(v1))], averaged over the batch, with
///   Pt = softmax((teacher - center) / tau_teacher) detached and Ps = softmax(student / tau_student).
torch::Tensor dino_loss(const TwoViews& student_logits, const TwoViews& teacher_logits, const torch::Tensor& center,
                        const DinoConfig& cfg);

/// c * center + (1 - c) * mean over rows of `teacher_logits` (N, K). Pure; no gradient.
torch::Tensor update_center(const torch::Tensor& center, const torch::Tensor& teacher_logits, double momentum);

/// Mean softmax entropy of (logits - center) / tau over rows; always in [0, ln K].
double softmax_entropy(const torch::Tensor& logits, const torch::Tensor& center, double tau);

/// Leafwise t <- m * t + (1 - m) * s outside autograd. Teacher tensors are matched to
/// student tensors by name; every teacher parameter must exist in the student with the
/// same shape (ShapeError otherwise). Student-only parameters (e.g. a predictor) are ignored.
void ema_update(torch::nn::Module& teacher, const torch::nn::Module& student, double momentum);
void ema_update(std::vector<torch::Tensor>& teacher, const std::vector<torch::Tensor>& student, double momentum);

/// NT-Xent over (2B, D) projections where rows i and i + B are the two views of image i.
torch::Tensor simclr_loss(const torch::Tensor& projections, double temperature);

/// Mean over the batch of |normalize(p) - normalize(sg(z))|^2 for one view assignment.
torch::Tensor byol_loss(const torch::Tensor& online_pred, const torch::Tensor& target_proj);

/// byol_loss symmetrized over the two view assignments.
torch::Tensor byol_loss(const TwoViews& online_pred, const TwoViews& target_proj);

/// Mean over the batch of -cos(p, sg(z)).
torch::Tensor negative_cosine(const torch::Tensor& pred, const torch::Tensor& proj);

/// 1/2 [-cos(p1, sg(z2)) - cos(p2, sg(z1))], averaged over the batch.
torch::Tensor simsiam_loss(const TwoViews& pred, const TwoViews& proj);

}  // namespace cxrssl::ssl
