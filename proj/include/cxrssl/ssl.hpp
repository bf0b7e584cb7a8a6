#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/batchnorm.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

#include "cxrssl/backbone.hpp"
#include "cxrssl/losses.hpp"
#include "cxrssl/optim.hpp"

namespace cxrssl::ssl {

enum class FrameworkKind { adapted_dino, simclr, byol, simsiam };

std::string to_string(FrameworkKind kind);
FrameworkKind parse_framework_kind(std::string_view name);

/// Heads and hyperparameters of the contrastive / siamese baselines.
struct ContrastiveConfig {
    std::int64_t proj_hidden = 64;
    std::int64_t proj_dim = 32;
    std::int64_t pred_hidden = 16;
    double temperature = 0.2;       ///< simclr
    double target_momentum = 0.996; ///< byol

    friend bool operator==(const ContrastiveConfig&, const ContrastiveConfig&) = default;
};

struct FrameworkConfig {
    FrameworkKind kind = FrameworkKind::adapted_dino;
    DinoConfig dino;
    ContrastiveConfig contrastive;

    bool has_teacher() const { return kind == FrameworkKind::adapted_dino || kind == FrameworkKind::byol; }
    bool has_predictor() const { return kind == FrameworkKind::byol || kind == FrameworkKind::simsiam; }

    friend bool operator==(const FrameworkConfig&, const FrameworkConfig&) = default;
};

void validate(const FrameworkConfig& cfg);

/// Three-layer GELU MLP (optionally batch-normalized), L2-normalized bottleneck, then a weight-normalized prototype layer
/// (unit-norm rows, no gain, no bias) producing K logits.
class DinoHeadImpl : public torch::nn::Module {
public:
    DinoHeadImpl(std::int64_t in_dim, const DinoConfig& cfg);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Linear fc1{nullptr};
    torch::nn::Linear fc2{nullptr};
    torch::nn::Linear fc3{nullptr};
    torch::nn::BatchNorm1d bn1{nullptr};
    torch::nn::BatchNorm1d bn2{nullptr};
    torch::Tensor prototypes;  ///< (K, bottleneck), normalized row-wise in forward
};
TORCH_MODULE(DinoHead);

/// Linear-BN-ReLU stack ending in a linear layer (optionally followed by BN).
class ProjectionMlpImpl : public torch::nn::Module {
public:
    ProjectionMlpImpl(std::int64_t in_dim, std::int64_t hidden, std::int64_t out_dim, int layers, bool bn_last);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential layers{nullptr};
};
TORCH_MODULE(ProjectionMlp);

/// Encoder plus framework head (and predictor for byol/simsiam).
/// Parameter names: "encoder.*", "head.*", "predictor.*".
class SslNetworkImpl : public torch::nn::Module {
public:
    SslNetworkImpl(const backbone::BackboneConfig& backbone, const FrameworkConfig& framework, bool with_predictor);

    /// Head output: prototype logits for dino, projections otherwise.
    torch::Tensor forward(const torch::Tensor& images);
    torch::Tensor predict(const torch::Tensor& projections);

    backbone::EncoderPtr encoder;
    DinoHead dino_head{nullptr};
    ProjectionMlp projector{nullptr};
    ProjectionMlp predictor{nullptr};
};
TORCH_MODULE(SslNetwork);

/// Complete resumable self-supervised training state.
struct SslState {
    SslNetwork student{nullptr};
    SslNetwork teacher{nullptr};  ///< null for frameworks without a momentum network
    torch::Tensor center;         ///< (K) for dino, undefined otherwise
    std::int64_t step = 0;
};

/// Fresh state: random student; teacher (when used) an exact copy of the student with
/// gradients disabled; zero center. Seeds torch's generator with `seed` first.
SslState make_ssl_state(const backbone::BackboneConfig& backbone, const FrameworkConfig& framework,
                        std::uint64_t seed);

/// Serializes student ("student."), teacher ("teacher."), center and step.
void export_state(const SslState& state, std::map<std::string, torch::Tensor>& out);
void import_state(SslState& state, const std::map<std::string, torch::Tensor>& in);

struct ViewBatch {
    torch::Tensor view1;  ///< (B, C, H, W)
    torch::Tensor view2;
};

struct StepHyper {
    double learning_rate = 0.0;
    double weight_decay = 0.0;
};

/// Loss plus named scalars. `teacher_entropy` is present only for dino.
struct FrameworkOutput {
    double loss = 0.0;
    std::map<std::string, double> diagnostics;
    /// Detached teacher logits of both views stacked (2B, K); dino only. Exposed for audits.
    torch::Tensor teacher_logits;
};

/// One optimizer step on the student, then the momentum update of the teacher
/// (dino, byol) and the center update (dino). A non-finite loss throws NumericError and
/// leaves the state untouched (including normalization buffers).
FrameworkOutput train_step(SslState& state, optim::Optimizer& optimizer, const ViewBatch& views,
                           const FrameworkConfig& cfg, const StepHyper& hyper);

/// Encoder used for downstream evaluation: the teacher's when the framework has one.
backbone::EncoderPtr evaluation_encoder(const SslState& state);

}  // namespace cxrssl::ssl
