#include "cxrssl/backbone.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <torch/torch.h>

#include "cxrssl/cells.hpp"
#include "cxrssl/errors.hpp"

namespace cxrssl::backbone {

std::string to_string(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::vitaev2: return "vitaev2";
        case BackboneKind::vit: return "vit";
        case BackboneKind::resnet50: return "resnet50";
    }
    throw ConfigError("unknown backbone kind");
}

BackboneKind parse_backbone_kind(std::string_view name) {
    if (name == "vitaev2") return BackboneKind::vitaev2;
    if (name == "vit") return BackboneKind::vit;
    if (name == "resnet50" || name == "resnet") return BackboneKind::resnet50;
    throw ConfigError("unknown backbone kind '" + std::string(name) + "' (expected vitaev2|vit|resnet50)");
}

// ---------------------------------------------------------------------------------------------
// Presets

BackboneConfig BackboneConfig::tiny_vitaev2() {
    return {};
}

BackboneConfig BackboneConfig::reference_vitaev2() {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::vitaev2;
    cfg.image_size = 224;
    cfg.in_channels = 3;
    cfg.stage_dims = {64, 128, 256, 512};
    cfg.stage_depths = {2, 2, 6, 1};
    cfg.num_heads = {1, 2, 4, 8};
    cfg.reduction_ratios = {4, 2, 2, 2};
    cfg.window_size = 7;
    cfg.embed_dim = 512;
    return cfg;
}

BackboneConfig BackboneConfig::tiny_vit() {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::vit;
    cfg.image_size = 32;
    cfg.patch_size = 8;
    cfg.stage_dims = {32};
    cfg.stage_depths = {2};
    cfg.num_heads = {2};
    cfg.reduction_ratios = {};
    cfg.embed_dim = 32;
    return cfg;
}

BackboneConfig BackboneConfig::vit_small16() {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::vit;
    cfg.image_size = 224;
    cfg.patch_size = 16;
    cfg.stage_dims = {384};
    cfg.stage_depths = {12};
    cfg.num_heads = {6};
    cfg.reduction_ratios = {};
    cfg.embed_dim = 384;
    return cfg;
}

BackboneConfig BackboneConfig::tiny_resnet() {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::resnet50;
    cfg.image_size = 32;
    cfg.stage_dims = {8, 16};
    cfg.stage_depths = {1, 1};
    cfg.num_heads = {};
    cfg.reduction_ratios = {};
    cfg.embed_dim = 64;
    return cfg;
}

BackboneConfig BackboneConfig::resnet50() {
    BackboneConfig cfg;
    cfg.kind = BackboneKind::resnet50;
    cfg.image_size = 224;
    cfg.stage_dims = {64, 128, 256, 512};
    cfg.stage_depths = {3, 4, 6, 3};
    cfg.num_heads = {};
    cfg.reduction_ratios = {};
    cfg.embed_dim = 2048;
    return cfg;
}

BackboneConfig BackboneConfig::preset(std::string_view name) {
    if (name == "tiny_vitaev2") return tiny_vitaev2();
    if (name == "reference_vitaev2") return reference_vitaev2();
    if (name == "tiny_vit") return tiny_vit();
    if (name == "vit_small16") return vit_small16();
    if (name == "tiny_resnet") return tiny_resnet();
    if (name == "resnet50") return resnet50();
    throw ConfigError("unknown backbone preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------------------------
// Validation

namespace {

bool is_power_of_two(std::int64_t v) {
    return v > 0 && (v & (v - 1)) == 0;
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ConfigError("backbone config: " + what);
    }
}

}  // namespace

void validate(const BackboneConfig& cfg) {
    require(cfg.image_size > 0, "image_size must be positive");
    require(cfg.in_channels > 0, "in_channels must be positive");
    require(cfg.embed_dim > 0, "embed_dim must be positive");
    require(cfg.mlp_ratio > 0.0, "mlp_ratio must be positive");
    require(!cfg.stage_dims.empty() && cfg.stage_dims.size() == cfg.stage_depths.size(),
            "stage_dims and stage_depths must be non-empty and of equal length");
    for (const auto d : cfg.stage_dims) require(d > 0, "stage dims must be positive");
    for (const auto d : cfg.stage_depths) require(d >= 0, "stage depths must be non-negative");

    switch (cfg.kind) {
        case BackboneKind::vitaev2: {
            const auto n = cfg.stage_dims.size();
            require(cfg.num_heads.size() == n && cfg.reduction_ratios.size() == n,
                    "stage_dims, stage_depths, num_heads and reduction_ratios must have equal length");
            std::int64_t cumulative = 1;
            for (std::size_t i = 0; i < n; ++i) {
                require(cfg.num_heads[i] > 0 && cfg.stage_dims[i] % cfg.num_heads[i] == 0,
                        "stage " + std::to_string(i) + " dim " + std::to_string(cfg.stage_dims[i]) +
                            " not divisible by head count " + std::to_string(cfg.num_heads[i]));
                require(cfg.reduction_ratios[i] >= 2 && is_power_of_two(cfg.reduction_ratios[i]),
                        "reduction ratios must be powers of two >= 2");
                cumulative *= cfg.reduction_ratios[i];
            }
            require(cfg.image_size % cumulative == 0,
                    "image_size " + std::to_string(cfg.image_size) + " not divisible by cumulative reduction " +
                        std::to_string(cumulative));
            require(cfg.window_size > 0, "window_size must be positive");
            break;
        }
        case BackboneKind::vit:
            require(!cfg.num_heads.empty() && cfg.num_heads[0] > 0 && cfg.stage_dims[0] % cfg.num_heads[0] == 0,
                    "vit width must be divisible by its head count");
            require(cfg.patch_size > 0 && cfg.image_size % cfg.patch_size == 0,
                    "image_size must be a multiple of patch_size");
            break;
        case BackboneKind::resnet50: {
            const auto stride = std::int64_t{4} << (cfg.stage_dims.size() - 1);
            require(cfg.image_size % stride == 0,
                    "image_size must be divisible by the total stride " + std::to_string(stride));
            for (const auto d : cfg.stage_depths) require(d >= 1, "resnet stages need at least one block");
            break;
        }
    }
}

std::vector<std::int64_t> stage_grid_sides(const BackboneConfig& cfg) {
    std::vector<std::int64_t> sides;
    auto side = cfg.image_size;
    for (const auto r : cfg.reduction_ratios) {
        side /= r;
        sides.push_back(side);
    }
    return sides;
}

void to_json(nlohmann::json& j, const BackboneConfig& cfg) {
    j = nlohmann::json{{"kind", to_string(cfg.kind)},
                       {"image_size", cfg.image_size},
                       {"in_channels", cfg.in_channels},
                       {"embed_dim", cfg.embed_dim},
                       {"stage_dims", cfg.stage_dims},
                       {"stage_depths", cfg.stage_depths},
                       {"num_heads", cfg.num_heads},
                       {"reduction_ratios", cfg.reduction_ratios},
                       {"window_size", cfg.window_size},
                       {"patch_size", cfg.patch_size},
                       {"mlp_ratio", cfg.mlp_ratio},
                       {"input_mean", cfg.input_mean},
                       {"input_std", cfg.input_std}};
}

void from_json(const nlohmann::json& j, BackboneConfig& cfg) {
    cfg.kind = parse_backbone_kind(j.at("kind").get<std::string>());
    j.at("image_size").get_to(cfg.image_size);
    j.at("in_channels").get_to(cfg.in_channels);
    j.at("embed_dim").get_to(cfg.embed_dim);
    j.at("stage_dims").get_to(cfg.stage_dims);
    j.at("stage_depths").get_to(cfg.stage_depths);
    j.at("num_heads").get_to(cfg.num_heads);
    j.at("reduction_ratios").get_to(cfg.reduction_ratios);
    j.at("window_size").get_to(cfg.window_size);
    j.at("patch_size").get_to(cfg.patch_size);
    j.at("mlp_ratio").get_to(cfg.mlp_ratio);
    cfg.input_mean = j.value("input_mean", cfg.input_mean);
    cfg.input_std = j.value("input_std", cfg.input_std);
}

// ---------------------------------------------------------------------------------------------
// Hybrid encoder

namespace {

torch::Tensor normalize_input(const torch::Tensor& images, const BackboneConfig& cfg) {
    return (images - cfg.input_mean) / cfg.input_std;
}

class HybridStageImpl : public torch::nn::Module {
public:
    HybridStageImpl(const StageSpec& spec, std::int64_t depth) {
        reduction = register_module("reduction", ReductionCell(spec));
        normal = register_module("normal", torch::nn::ModuleList());
        for (std::int64_t d = 0; d < depth; ++d) {
            normal->push_back(NormalCell(spec));
        }
    }

    TokenGrid forward(const torch::Tensor& x) {
        TokenGrid grid = reduction->forward(x);
        for (const auto& cell : *normal) {
            grid = cell->as<NormalCell>()->forward(grid);
        }
        return grid;
    }

    ReductionCell reduction{nullptr};
    torch::nn::ModuleList normal{nullptr};
};
TORCH_MODULE(HybridStage);

class ViTAEv2Impl : public EncoderImpl {
public:
    explicit ViTAEv2Impl(const BackboneConfig& cfg) : EncoderImpl(cfg) {
        stages_ = register_module("stages", torch::nn::ModuleList());
        std::int64_t in_dim = cfg.in_channels;
        for (std::size_t i = 0; i < cfg.stage_dims.size(); ++i) {
            StageSpec spec;
            spec.in_dim = in_dim;
            spec.dim = cfg.stage_dims[i];
            spec.heads = cfg.num_heads[i];
            spec.window = cfg.window_size;
            spec.ratio = cfg.reduction_ratios[i];
            spec.mlp_ratio = cfg.mlp_ratio;
            spec.stage_index = static_cast<std::int64_t>(i);
            stages_->push_back(HybridStage(spec, cfg.stage_depths[i]));
            in_dim = spec.dim;
        }
        norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({in_dim})));
        if (cfg.embed_dim != in_dim) {
            projection_ = register_module("projection", torch::nn::Linear(in_dim, cfg.embed_dim));
        }
        init_transformer_weights(*this);
    }

    torch::Tensor forward(const torch::Tensor& images) override {
        torch::Tensor x = normalize_input(images, config());
        TokenGrid grid;
        for (const auto& stage : *stages_) {
            grid = stage->as<HybridStage>()->forward(x);
            x = grid.to_nchw();
        }
        auto pooled = norm_(grid.tokens).mean(1);
        return projection_ ? projection_(pooled) : pooled;
    }

private:
    torch::nn::ModuleList stages_{nullptr};
    torch::nn::LayerNorm norm_{nullptr};
    torch::nn::Linear projection_{nullptr};
};

// ---------------------------------------------------------------------------------------------
// Plain ViT

class SelfAttentionImpl : public torch::nn::Module {
public:
    SelfAttentionImpl(std::int64_t dim, std::int64_t heads) : dim_(dim), heads_(heads) {
        qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
        proj = register_module("proj", torch::nn::Linear(dim, dim));
    }

    torch::Tensor forward(const torch::Tensor& x) {
        const auto b = x.size(0);
        const auto n = x.size(1);
        const auto hd = dim_ / heads_;
        auto parts = qkv(x).reshape({b, n, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
        auto attn = torch::softmax(parts[0].matmul(parts[1].transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)), -1);
        return proj(attn.matmul(parts[2]).transpose(1, 2).reshape({b, n, dim_}));
    }

    torch::nn::Linear qkv{nullptr};
    torch::nn::Linear proj{nullptr};

private:
    std::int64_t dim_;
    std::int64_t heads_;
};
TORCH_MODULE(SelfAttention);

class TransformerBlockImpl : public torch::nn::Module {
public:
    TransformerBlockImpl(std::int64_t dim, std::int64_t heads, double mlp_ratio) {
        norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
        attn = register_module("attn", SelfAttention(dim, heads));
        norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
        ffn = register_module("ffn", FeedForward(dim, static_cast<std::int64_t>(std::llround(dim * mlp_ratio))));
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = x + attn(norm1(x));
        return y + ffn(norm2(y));
    }

    torch::nn::LayerNorm norm1{nullptr};
    SelfAttention attn{nullptr};
    torch::nn::LayerNorm norm2{nullptr};
    FeedForward ffn{nullptr};
};
TORCH_MODULE(TransformerBlock);

class VisionTransformerImpl : public EncoderImpl {
public:
    explicit VisionTransformerImpl(const BackboneConfig& cfg) : EncoderImpl(cfg) {
        const auto width = cfg.stage_dims[0];
        const auto grid = cfg.image_size / cfg.patch_size;
        patch_embed_ = register_module(
            "patch_embed",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.in_channels, width, cfg.patch_size).stride(cfg.patch_size)));
        cls_token_ = register_parameter("cls_token", torch::zeros({1, 1, width}));
        pos_embed_ = register_parameter("pos_embed", torch::zeros({1, grid * grid + 1, width}));
        blocks_ = register_module("blocks", torch::nn::ModuleList());
        for (std::int64_t i = 0; i < cfg.stage_depths[0]; ++i) {
            blocks_->push_back(TransformerBlock(width, cfg.num_heads[0], cfg.mlp_ratio));
        }
        norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
        if (cfg.embed_dim != width) {
            projection_ = register_module("projection", torch::nn::Linear(width, cfg.embed_dim));
        }
        init_transformer_weights(*this);
        torch::NoGradGuard guard;
        cls_token_.normal_(0.0, 0.02).clamp_(-0.04, 0.04);
        pos_embed_.normal_(0.0, 0.02).clamp_(-0.04, 0.04);
    }

    torch::Tensor forward(const torch::Tensor& images) override {
        auto x = patch_embed_(normalize_input(images, config())).flatten(2).transpose(1, 2);
        x = torch::cat({cls_token_.expand({x.size(0), -1, -1}), x}, 1) + pos_embed_;
        for (const auto& block : *blocks_) {
            x = block->as<TransformerBlock>()->forward(x);
        }
        auto cls = norm_(x).select(1, 0);
        return projection_ ? projection_(cls) : cls;
    }

private:
    torch::nn::Conv2d patch_embed_{nullptr};
    torch::Tensor cls_token_;
    torch::Tensor pos_embed_;
    torch::nn::ModuleList blocks_{nullptr};
    torch::nn::LayerNorm norm_{nullptr};
    torch::nn::Linear projection_{nullptr};
};

// ---------------------------------------------------------------------------------------------
// ResNet (bottleneck)

torch::nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

class BottleneckImpl : public torch::nn::Module {
public:
    static constexpr std::int64_t kExpansion = 4;

    BottleneckImpl(std::int64_t in, std::int64_t width, std::int64_t stride) {
        conv1 = register_module("conv1", conv(in, width, 1));
        bn1 = register_module("bn1", torch::nn::BatchNorm2d(width));
        conv2 = register_module("conv2", conv(width, width, 3, stride));
        bn2 = register_module("bn2", torch::nn::BatchNorm2d(width));
        conv3 = register_module("conv3", conv(width, width * kExpansion, 1));
        bn3 = register_module("bn3", torch::nn::BatchNorm2d(width * kExpansion));
        if (stride != 1 || in != width * kExpansion) {
            down_conv = register_module("downsample_conv", conv(in, width * kExpansion, 1, stride));
            down_bn = register_module("downsample_bn", torch::nn::BatchNorm2d(width * kExpansion));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = torch::relu(bn1(conv1(x)));
        y = torch::relu(bn2(conv2(y)));
        y = bn3(conv3(y));
        auto shortcut = down_conv ? down_bn(down_conv(x)) : x;
        return torch::relu(y + shortcut);
    }

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, down_conv{nullptr};
    torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr}, down_bn{nullptr};
};
TORCH_MODULE(Bottleneck);

class ResNetImpl : public EncoderImpl {
public:
    explicit ResNetImpl(const BackboneConfig& cfg) : EncoderImpl(cfg) {
        const auto stem = cfg.stage_dims[0];
        stem_conv_ = register_module(
            "stem_conv",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.in_channels, stem, 7).stride(2).padding(3).bias(false)));
        stem_bn_ = register_module("stem_bn", torch::nn::BatchNorm2d(stem));
        stages_ = register_module("stages", torch::nn::ModuleList());
        std::int64_t in = stem;
        for (std::size_t s = 0; s < cfg.stage_dims.size(); ++s) {
            torch::nn::Sequential stage;
            for (std::int64_t b = 0; b < cfg.stage_depths[s]; ++b) {
                const std::int64_t stride = (s > 0 && b == 0) ? 2 : 1;
                stage->push_back(Bottleneck(in, cfg.stage_dims[s], stride));
                in = cfg.stage_dims[s] * BottleneckImpl::kExpansion;
            }
            stages_->push_back(stage);
        }
        if (cfg.embed_dim != in) {
            projection_ = register_module("projection", torch::nn::Linear(in, cfg.embed_dim));
        }
        torch::NoGradGuard guard;
        for (auto& m : modules(false)) {
            if (auto* c = m->as<torch::nn::Conv2d>()) {
                torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
            }
        }
    }

    torch::Tensor forward(const torch::Tensor& images) override {
        auto x = torch::relu(stem_bn_(stem_conv_(normalize_input(images, config()))));
        x = torch::max_pool2d(x, 3, 2, 1);
        for (const auto& stage : *stages_) {
            x = stage->as<torch::nn::Sequential>()->forward(x);
        }
        auto pooled = x.mean({2, 3});
        return projection_ ? projection_(pooled) : pooled;
    }

private:
    torch::nn::Conv2d stem_conv_{nullptr};
    torch::nn::BatchNorm2d stem_bn_{nullptr};
    torch::nn::ModuleList stages_{nullptr};
    torch::nn::Linear projection_{nullptr};
};

}  // namespace

EncoderPtr make_encoder(const BackboneConfig& cfg) {
    validate(cfg);
    switch (cfg.kind) {
        case BackboneKind::vitaev2: return std::make_shared<ViTAEv2Impl>(cfg);
        case BackboneKind::vit: return std::make_shared<VisionTransformerImpl>(cfg);
        case BackboneKind::resnet50: return std::make_shared<ResNetImpl>(cfg);
    }
    throw ConfigError("unknown backbone kind");
}

torch::Tensor forward_backbone(EncoderImpl& encoder, const torch::Tensor& images) {
    const auto& cfg = encoder.config();
    if (images.dim() != 4 || images.size(1) != cfg.in_channels || images.size(2) != cfg.image_size ||
        images.size(3) != cfg.image_size) {
        throw ShapeError("forward_backbone: expected (B, " + std::to_string(cfg.in_channels) + ", " +
                         std::to_string(cfg.image_size) + ", " + std::to_string(cfg.image_size) + ") images, got " +
                         std::string(c10::str(images.sizes())));
    }
    return encoder.forward(images);
}

std::int64_t count_params(const torch::nn::Module& module) {
    std::int64_t total = 0;
    for (const auto& p : module.parameters()) {
        if (p.requires_grad()) {
            total += p.numel();
        }
    }
    return total;
}

std::int64_t count_params(const BackboneConfig& cfg) {
    return count_params(*make_encoder(cfg));
}

}  // namespace cxrssl::backbone
