#include <cmath>

#include "cxrssl/config_json.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/train.hpp"

namespace cxrssl {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what) {
    if (!j.is_object()) {
        throw ConfigError(std::string(what) + " must be an object");
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || item.key() == a;
        if (!known) {
            throw ConfigError("unknown " + std::string(what) + " key '" + item.key() + "'");
        }
    }
}

}  // namespace cxrssl

#define CXRSSL_PUT(f) j[#f] = cfg.f;
#define CXRSSL_GET(f) if (j.contains(#f)) j.at(#f).get_to(cfg.f);
#define CXRSSL_NAME(f) #f,

namespace cxrssl::ssl {

#define DINO_FIELDS(X) X(out_dim) X(hidden_dim) X(bottleneck_dim) X(tau_student) X(tau_teacher) X(teacher_momentum) X(center_momentum) X(head_batchnorm) X(allow_equal_temperatures)
#define CONTRASTIVE_FIELDS(X) X(proj_hidden) X(proj_dim) X(pred_hidden) X(temperature) X(target_momentum)

void to_json(nlohmann::json& j, const DinoConfig& cfg) {
    j = nlohmann::json::object();
    DINO_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, DinoConfig& cfg) {
    reject_unknown_keys(j, {DINO_FIELDS(CXRSSL_NAME)}, "dino");
    DINO_FIELDS(CXRSSL_GET)
}

void to_json(nlohmann::json& j, const ContrastiveConfig& cfg) {
    j = nlohmann::json::object();
    CONTRASTIVE_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, ContrastiveConfig& cfg) {
    reject_unknown_keys(j, {CONTRASTIVE_FIELDS(CXRSSL_NAME)}, "contrastive");
    CONTRASTIVE_FIELDS(CXRSSL_GET)
}

void to_json(nlohmann::json& j, const FrameworkConfig& cfg) {
    j = {{"kind", to_string(cfg.kind)}, {"dino", cfg.dino}, {"contrastive", cfg.contrastive}};
}

void from_json(const nlohmann::json& j, FrameworkConfig& cfg) {
    reject_unknown_keys(j, {"kind", "dino", "contrastive"}, "framework");
    if (j.contains("kind")) cfg.kind = parse_framework_kind(j.at("kind").get<std::string>());
    if (j.contains("dino")) j.at("dino").get_to(cfg.dino);
    if (j.contains("contrastive")) j.at("contrastive").get_to(cfg.contrastive);
}

}  // namespace cxrssl::ssl

namespace cxrssl::optim {

#define OPTIM_FIELDS(X) X(momentum) X(beta1) X(beta2) X(eps) X(trust_coefficient)

void to_json(nlohmann::json& j, const OptimizerConfig& cfg) {
    j = {{"kind", to_string(cfg.kind)}};
    OPTIM_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, OptimizerConfig& cfg) {
    reject_unknown_keys(j, {"kind", OPTIM_FIELDS(CXRSSL_NAME)}, "optimizer");
    if (j.contains("kind")) cfg.kind = parse_optimizer_kind(j.at("kind").get<std::string>());
    OPTIM_FIELDS(CXRSSL_GET)
}

}  // namespace cxrssl::optim

namespace cxrssl::data {

#define PREPROCESS_FIELDS(X) X(resize) X(crop) X(channels)

void to_json(nlohmann::json& j, const PreprocessConfig& cfg) {
    j = nlohmann::json::object();
    PREPROCESS_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, PreprocessConfig& cfg) {
    reject_unknown_keys(j, {PREPROCESS_FIELDS(CXRSSL_NAME)}, "preprocess");
    PREPROCESS_FIELDS(CXRSSL_GET)
}

}  // namespace cxrssl::data

namespace cxrssl::train {

std::string to_string(LrPolicy policy) {
    return policy == LrPolicy::cosine ? "cosine" : "constant";
}

LrPolicy parse_lr_policy(std::string_view name) {
    if (name == "constant") return LrPolicy::constant;
    if (name == "cosine") return LrPolicy::cosine;
    throw ConfigError("unknown lr policy '" + std::string(name) + "' (expected constant|cosine)");
}

#define PRETRAIN_FIELDS(X) X(base_lr) X(wd_start) X(wd_end) X(epochs) X(batch_size) X(warmup_epochs) X(seed) X(keep_checkpoints) X(threads)

void validate(const PretrainConfig& cfg) {
    ssl::validate(cfg.framework);
    backbone::validate(cfg.backbone);
    augment::validate(cfg.augment);
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.framework.kind == ssl::FrameworkKind::simclr && cfg.batch_size < 2) {
        throw ConfigError("simclr needs batch_size >= 2 for negatives");
    }
    if (cfg.framework.has_predictor() || cfg.framework.kind == ssl::FrameworkKind::simclr) {
        // BatchNorm in the projection heads needs more than one sample per view.
        if (cfg.batch_size < 2) throw ConfigError("batch_size must be >= 2 for this framework");
    }
    if (!(cfg.base_lr >= 0.0) || !std::isfinite(cfg.base_lr)) throw ConfigError("base_lr must be finite and >= 0");
    if (!(cfg.wd_start >= 0.0 && cfg.wd_start <= cfg.wd_end)) throw ConfigError("weight decay needs 0 <= wd_start <= wd_end");
    if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.epochs) {
        throw ConfigError("warmup_epochs must lie in [0, epochs)");
    }
    if (cfg.keep_checkpoints < 1) throw ConfigError("keep_checkpoints must be >= 1");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.augment.out_size != cfg.backbone.image_size) {
        throw ConfigError("augment.out_size (" + std::to_string(cfg.augment.out_size) + ") must equal backbone.image_size (" +
                          std::to_string(cfg.backbone.image_size) + ")");
    }
}

void to_json(nlohmann::json& j, const PretrainConfig& cfg) {
    j = {{"framework", cfg.framework}, {"backbone", cfg.backbone}, {"optimizer", cfg.optimizer},
         {"augment", cfg.augment},     {"lr_policy", to_string(cfg.lr_policy)}};
    PRETRAIN_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, PretrainConfig& cfg) {
    reject_unknown_keys(j, {"framework", "backbone", "optimizer", "augment", "lr_policy", PRETRAIN_FIELDS(CXRSSL_NAME)},
                        "pretrain");
    if (j.contains("framework")) j.at("framework").get_to(cfg.framework);
    if (j.contains("backbone")) j.at("backbone").get_to(cfg.backbone);
    if (j.contains("optimizer")) j.at("optimizer").get_to(cfg.optimizer);
    if (j.contains("augment")) j.at("augment").get_to(cfg.augment);
    if (j.contains("lr_policy")) cfg.lr_policy = parse_lr_policy(j.at("lr_policy").get<std::string>());
    PRETRAIN_FIELDS(CXRSSL_GET)
}

PretrainConfig full_pretrain_preset(ssl::FrameworkKind framework, backbone::BackboneKind kind) {
    PretrainConfig cfg;
    cfg.framework.kind = framework;
    switch (kind) {
        case backbone::BackboneKind::vitaev2: cfg.backbone = backbone::BackboneConfig::reference_vitaev2(); break;
        case backbone::BackboneKind::vit: cfg.backbone = backbone::BackboneConfig::vit_small16(); break;
        case backbone::BackboneKind::resnet50: cfg.backbone = backbone::BackboneConfig::resnet50(); break;
    }
    cfg.augment.out_size = cfg.backbone.image_size;
    cfg.batch_size = 64;
    cfg.epochs = 100;
    cfg.framework.dino.out_dim = 4096;
    cfg.framework.dino.hidden_dim = 2048;
    cfg.framework.dino.bottleneck_dim = 256;
    cfg.framework.contrastive = {2048, 256, 512, 0.2, 0.996};
    const bool hybrid = kind == backbone::BackboneKind::vitaev2;
    auto set = [&](optim::OptimizerKind opt, double lr, double wd0, double wd1) {
        cfg.optimizer.kind = opt;
        cfg.base_lr = lr;
        cfg.wd_start = wd0;
        cfg.wd_end = wd1;
    };
    switch (framework) {
        case ssl::FrameworkKind::simsiam: set(optim::OptimizerKind::sgd, hybrid ? 0.0125 : 0.025, 1e-4, 1e-4); break;
        case ssl::FrameworkKind::simclr: set(optim::OptimizerKind::lars, hybrid ? 0.075 : 0.15, 1e-5, 1e-5); break;
        case ssl::FrameworkKind::byol: set(optim::OptimizerKind::lars, hybrid ? 0.05 : 0.1, 1e-5, 1e-5); break;
        case ssl::FrameworkKind::adapted_dino:
            if (hybrid) {
                set(optim::OptimizerKind::adam, 0.000125, 1e-7, 1e-6);
            } else {
                set(optim::OptimizerKind::adam, 0.00025, 1e-6, 1e-5);
            }
            break;
    }
    return cfg;
}

PretrainConfig toy_pretrain_preset(ssl::FrameworkKind framework, backbone::BackboneKind kind) {
    PretrainConfig cfg = full_pretrain_preset(framework, kind);
    switch (kind) {
        case backbone::BackboneKind::vitaev2: cfg.backbone = backbone::BackboneConfig::tiny_vitaev2(); break;
        case backbone::BackboneKind::vit: cfg.backbone = backbone::BackboneConfig::tiny_vit(); break;
        case backbone::BackboneKind::resnet50: cfg.backbone = backbone::BackboneConfig::tiny_resnet(); break;
    }
    cfg.augment.out_size = cfg.backbone.image_size;
    cfg.framework.dino = ssl::DinoConfig{};
    cfg.framework.contrastive = ssl::ContrastiveConfig{};
    cfg.batch_size = 20;
    cfg.epochs = 50;
    if (framework == ssl::FrameworkKind::adapted_dino) {
        cfg.base_lr = 1e-3;
        // A short run needs a faster teacher than the 0.996 used over 100 long epochs.
        cfg.framework.dino.teacher_momentum = 0.99;
    }
    return cfg;
}

#define LINEAR_FIELDS(X) X(base_lr) X(weight_decay) X(epochs) X(warmup_epochs) X(momentum) X(batch_size) X(lr_grid) X(wd_grid) X(grid_search) X(standardize) X(seed)

void validate(const LinearEvalConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("eval.epochs must be >= 1");
    if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.epochs) throw ConfigError("eval.warmup_epochs must lie in [0, epochs)");
    if (cfg.batch_size < 1) throw ConfigError("eval.batch_size must be >= 1");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("eval.momentum must lie in [0, 1)");
    if (cfg.grid_search && (cfg.lr_grid.empty() || cfg.wd_grid.empty())) throw ConfigError("eval grids must be non-empty");
    for (const double v : cfg.lr_grid) if (!(v > 0.0)) throw ConfigError("eval.lr_grid values must be positive");
    for (const double v : cfg.wd_grid) if (!(v >= 0.0)) throw ConfigError("eval.wd_grid values must be non-negative");
    if (cfg.preprocess.crop < 1 || cfg.preprocess.crop > cfg.preprocess.resize) throw ConfigError("eval.preprocess.crop must lie in [1, resize]");
}

void to_json(nlohmann::json& j, const LinearEvalConfig& cfg) {
    j = {{"lr_policy", to_string(cfg.lr_policy)}, {"preprocess", cfg.preprocess}};
    LINEAR_FIELDS(CXRSSL_PUT)
}

void from_json(const nlohmann::json& j, LinearEvalConfig& cfg) {
    reject_unknown_keys(j, {"lr_policy", "preprocess", LINEAR_FIELDS(CXRSSL_NAME)}, "eval");
    if (j.contains("lr_policy")) cfg.lr_policy = parse_lr_policy(j.at("lr_policy").get<std::string>());
    if (j.contains("preprocess")) j.at("preprocess").get_to(cfg.preprocess);
    LINEAR_FIELDS(CXRSSL_GET)
}

LinearEvalConfig full_linear_eval_preset(backbone::BackboneKind kind) {
    LinearEvalConfig cfg;
    cfg.batch_size = kind == backbone::BackboneKind::vitaev2 ? 256 : 512;
    return cfg;
}

LinearEvalConfig toy_linear_eval_preset(const backbone::BackboneConfig& backbone) {
    LinearEvalConfig cfg;
    cfg.batch_size = 32;
    // Same 256/224 resize-to-crop ratio as the full-scale pipeline.
    cfg.preprocess.crop = backbone.image_size;
    cfg.preprocess.resize = static_cast<int>(std::lround(backbone.image_size * 256.0 / 224.0));
    cfg.preprocess.channels = static_cast<int>(backbone.in_channels);
    return cfg;
}

}  // namespace cxrssl::train
