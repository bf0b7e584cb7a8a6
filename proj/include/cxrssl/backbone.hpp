#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/nn/module.h>
#include <torch/types.h>

namespace cxrssl::backbone {

enum class BackboneKind { vitaev2, vit, resnet50 };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view name);

/// Declarative encoder description.
///
/// The per-stage lists are interpreted by kind:
///  - vitaev2: one entry per stage (reduction cell followed by `stage_depths[i]` normal cells).
///  - vit: only the first entry is used (token width, block count, head count).
///  - resnet50: bottleneck widths and block counts per stage; heads and ratios are ignored.
struct BackboneConfig {
    BackboneKind kind = BackboneKind::vitaev2;
    std::int64_t image_size = 32;
    std::int64_t in_channels = 3;
    std::int64_t embed_dim = 32;
    std::vector<std::int64_t> stage_dims{16, 32};
    std::vector<std::int64_t> stage_depths{1, 1};
    std::vector<std::int64_t> num_heads{1, 2};
    std::vector<std::int64_t> reduction_ratios{4, 2};
    std::int64_t window_size = 4;
    std::int64_t patch_size = 16;
    double mlp_ratio = 4.0;
    /// Inputs in [0, 1] enter the network as (x - input_mean) / input_std.
    double input_mean = 0.5;
    double input_std = 0.25;

    friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;

    /// Desk-scale hybrid encoder used by tests and toy runs (well under 1M parameters).
    static BackboneConfig tiny_vitaev2();
    /// Hybrid encoder sized to the 19.35M-parameter reference.
    static BackboneConfig reference_vitaev2();
    static BackboneConfig tiny_vit();
    /// ViT-S/16 at 224 pixels.
    static BackboneConfig vit_small16();
    static BackboneConfig tiny_resnet();
    /// Standard ResNet-50 trunk (no classifier).
    static BackboneConfig resnet50();
    /// Looks up one of the named presets above ("tiny_vitaev2", "reference_vitaev2", ...).
    static BackboneConfig preset(std::string_view name);
};

/// Throws ConfigError when the configuration violates a structural invariant.
void validate(const BackboneConfig& cfg);

/// Token-grid sides produced by each hybrid stage (vitaev2 only).
std::vector<std::int64_t> stage_grid_sides(const BackboneConfig& cfg);

void to_json(nlohmann::json& j, const BackboneConfig& cfg);
void from_json(const nlohmann::json& j, BackboneConfig& cfg);

/// Common interface of every encoder: images (B, C, H, W) in, embedding (B, embed_dim) out.
class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(BackboneConfig cfg) : cfg_(std::move(cfg)) {}
    ~EncoderImpl() override = default;

    virtual torch::Tensor forward(const torch::Tensor& images) = 0;

    const BackboneConfig& config() const noexcept { return cfg_; }
    std::int64_t embed_dim() const noexcept { return cfg_.embed_dim; }

private:
    BackboneConfig cfg_;
};

using EncoderPtr = std::shared_ptr<EncoderImpl>;

/// Instantiates the encoder for `cfg` (validated) with freshly initialized parameters.
/// Parameter initialization draws from torch's global generator; seed it first.
EncoderPtr make_encoder(const BackboneConfig& cfg);

/// Checks that `images` matches the configured channels and size, then runs the encoder.
torch::Tensor forward_backbone(EncoderImpl& encoder, const torch::Tensor& images);

/// Number of trainable scalars in a module.
std::int64_t count_params(const torch::nn::Module& module);

/// Number of trainable scalars of the encoder instantiated from `cfg`.
std::int64_t count_params(const BackboneConfig& cfg);

}  // namespace cxrssl::backbone
