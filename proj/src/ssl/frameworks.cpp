#include "cxrssl/ssl.hpp"

#include <cmath>
#include <string>

#include <torch/torch.h>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/errors.hpp"

namespace cxrssl::ssl {

std::string to_string(FrameworkKind kind) {
    switch (kind) {
        case FrameworkKind::adapted_dino: return "adapted_dino";
        case FrameworkKind::simclr: return "simclr";
        case FrameworkKind::byol: return "byol";
        case FrameworkKind::simsiam: return "simsiam";
    }
    throw ConfigError("unknown framework kind");
}

FrameworkKind parse_framework_kind(std::string_view name) {
    if (name == "adapted_dino" || name == "dino") return FrameworkKind::adapted_dino;
    if (name == "simclr") return FrameworkKind::simclr;
    if (name == "byol") return FrameworkKind::byol;
    if (name == "simsiam") return FrameworkKind::simsiam;
    throw ConfigError("unknown framework '" + std::string(name) + "' (expected adapted_dino|simclr|byol|simsiam)");
}

void validate(const FrameworkConfig& cfg) {
    if (cfg.kind == FrameworkKind::adapted_dino) {
        validate(cfg.dino);
        return;
    }
    const auto& c = cfg.contrastive;
    if (c.proj_hidden <= 0 || c.proj_dim <= 0 || c.pred_hidden <= 0) {
        throw ConfigError("projection/predictor sizes must be positive");
    }
    if (!(c.temperature > 0.0)) {
        throw ConfigError("simclr temperature must be positive");
    }
    if (!(c.target_momentum >= 0.0 && c.target_momentum <= 1.0)) {
        throw ConfigError("byol target momentum must lie in [0, 1]");
    }
}

// ---------------------------------------------------------------------------------------------
// Heads

DinoHeadImpl::DinoHeadImpl(std::int64_t in_dim, const DinoConfig& cfg) {
    fc1 = register_module("fc1", torch::nn::Linear(in_dim, cfg.hidden_dim));
    fc2 = register_module("fc2", torch::nn::Linear(cfg.hidden_dim, cfg.hidden_dim));
    fc3 = register_module("fc3", torch::nn::Linear(cfg.hidden_dim, cfg.bottleneck_dim));
    if (cfg.head_batchnorm) {
        bn1 = register_module("bn1", torch::nn::BatchNorm1d(cfg.hidden_dim));
        bn2 = register_module("bn2", torch::nn::BatchNorm1d(cfg.hidden_dim));
    }
    prototypes = register_parameter("prototypes", torch::empty({cfg.out_dim, cfg.bottleneck_dim}));
    torch::NoGradGuard guard;
    torch::nn::init::kaiming_uniform_(prototypes, std::sqrt(5.0));
}

torch::Tensor DinoHeadImpl::forward(const torch::Tensor& x) {
    auto h = fc1(x);
    h = torch::gelu(bn1 ? bn1(h) : h);
    h = fc2(h);
    h = torch::gelu(bn2 ? bn2(h) : h);
    h = torch::nn::functional::normalize(fc3(h), torch::nn::functional::NormalizeFuncOptions().dim(-1).eps(1e-12));
    const auto w = torch::nn::functional::normalize(prototypes,
                                                    torch::nn::functional::NormalizeFuncOptions().dim(1).eps(1e-12));
    return h.matmul(w.t());
}

ProjectionMlpImpl::ProjectionMlpImpl(std::int64_t in_dim, std::int64_t hidden, std::int64_t out_dim, int num_layers,
                                     bool bn_last) {
    layers = register_module("layers", torch::nn::Sequential());
    std::int64_t width = in_dim;
    for (int i = 0; i + 1 < num_layers; ++i) {
        layers->push_back(torch::nn::Linear(torch::nn::LinearOptions(width, hidden).bias(false)));
        layers->push_back(torch::nn::BatchNorm1d(hidden));
        layers->push_back(torch::nn::ReLU());
        width = hidden;
    }
    layers->push_back(torch::nn::Linear(width, out_dim));
    if (bn_last) {
        layers->push_back(torch::nn::BatchNorm1d(out_dim));
    }
}

torch::Tensor ProjectionMlpImpl::forward(const torch::Tensor& x) {
    return layers->forward(x);
}

// ---------------------------------------------------------------------------------------------
// Network

SslNetworkImpl::SslNetworkImpl(const backbone::BackboneConfig& backbone, const FrameworkConfig& framework,
                               bool with_predictor) {
    encoder = register_module("encoder", backbone::make_encoder(backbone));
    const auto width = backbone.embed_dim;
    const auto& c = framework.contrastive;
    switch (framework.kind) {
        case FrameworkKind::adapted_dino:
            dino_head = register_module("head", DinoHead(width, framework.dino));
            break;
        case FrameworkKind::simclr:
            projector = register_module("head", ProjectionMlp(width, c.proj_hidden, c.proj_dim, 2, false));
            break;
        case FrameworkKind::byol:
            projector = register_module("head", ProjectionMlp(width, c.proj_hidden, c.proj_dim, 2, false));
            if (with_predictor) {
                predictor = register_module("predictor", ProjectionMlp(c.proj_dim, c.pred_hidden, c.proj_dim, 2, false));
            }
            break;
        case FrameworkKind::simsiam:
            projector = register_module("head", ProjectionMlp(width, c.proj_hidden, c.proj_dim, 3, true));
            if (with_predictor) {
                predictor = register_module("predictor", ProjectionMlp(c.proj_dim, c.pred_hidden, c.proj_dim, 2, false));
            }
            break;
    }
}

torch::Tensor SslNetworkImpl::forward(const torch::Tensor& images) {
    auto features = encoder->forward(images);
    return dino_head ? dino_head(features) : projector(features);
}

torch::Tensor SslNetworkImpl::predict(const torch::Tensor& projections) {
    if (!predictor) {
        throw ConfigError("network has no predictor");
    }
    return predictor(projections);
}

// ---------------------------------------------------------------------------------------------
// State

SslState make_ssl_state(const backbone::BackboneConfig& backbone, const FrameworkConfig& framework,
                        std::uint64_t seed) {
    validate(framework);
    torch::manual_seed(seed);
    SslState state;
    state.student = SslNetwork(backbone, framework, framework.has_predictor());
    if (framework.has_teacher()) {
        state.teacher = SslNetwork(backbone, framework, false);
        std::map<std::string, torch::Tensor> student_tensors;
        backbone::export_module(*state.student, "", student_tensors);
        backbone::import_module(*state.teacher, "", student_tensors);
        for (auto& p : state.teacher->parameters()) {
            p.set_requires_grad(false);
        }
    }
    if (framework.kind == FrameworkKind::adapted_dino) {
        state.center = torch::zeros({framework.dino.out_dim});
    }
    return state;
}

void export_state(const SslState& state, std::map<std::string, torch::Tensor>& out) {
    backbone::export_module(*state.student, "student.", out);
    if (state.teacher) {
        backbone::export_module(*state.teacher, "teacher.", out);
    }
    if (state.center.defined()) {
        out["center"] = state.center.clone();
    }
    out["step"] = torch::tensor(state.step, torch::kInt64);
}

void import_state(SslState& state, const std::map<std::string, torch::Tensor>& in) {
    backbone::import_module(*state.student, "student.", in);
    if (state.teacher) {
        backbone::import_module(*state.teacher, "teacher.", in);
    }
    if (state.center.defined()) {
        const auto it = in.find("center");
        if (it == in.end() || it->second.sizes() != state.center.sizes()) {
            throw ArtifactError("checkpoint has no compatible 'center'");
        }
        state.center = it->second.clone().to(state.center.dtype());
    }
    const auto step = in.find("step");
    if (step == in.end()) {
        throw ArtifactError("checkpoint has no 'step'");
    }
    state.step = step->second.item<std::int64_t>();
}

backbone::EncoderPtr evaluation_encoder(const SslState& state) {
    return state.teacher ? state.teacher->encoder : state.student->encoder;
}

// ---------------------------------------------------------------------------------------------
// Training step

namespace {

std::vector<torch::Tensor> snapshot_buffers(const SslState& state) {
    std::vector<torch::Tensor> out;
    for (const auto& b : state.student->buffers()) out.push_back(b.clone());
    if (state.teacher) {
        for (const auto& b : state.teacher->buffers()) out.push_back(b.clone());
    }
    return out;
}

void restore_buffers(SslState& state, const std::vector<torch::Tensor>& saved) {
    torch::NoGradGuard guard;
    std::size_t i = 0;
    for (auto& b : state.student->buffers()) b.copy_(saved[i++]);
    if (state.teacher) {
        for (auto& b : state.teacher->buffers()) b.copy_(saved[i++]);
    }
}

double mean_view_cosine(const torch::Tensor& a, const torch::Tensor& b) {
    torch::NoGradGuard guard;
    return torch::cosine_similarity(a, b, 1).mean().item<double>();
}

}  // namespace

FrameworkOutput train_step(SslState& state, optim::Optimizer& optimizer, const ViewBatch& views,
                           const FrameworkConfig& cfg, const StepHyper& hyper) {
    if (!views.view1.defined() || views.view1.sizes() != views.view2.sizes() || views.view1.dim() != 4) {
        throw ShapeError("train_step: both views must be (B, C, H, W) with equal shapes");
    }
    if (cfg.has_teacher() && !state.teacher) {
        throw ConfigError("train_step: framework needs a teacher network");
    }
    const auto batch = views.view1.size(0);
    const auto both = torch::cat({views.view1, views.view2}, 0);
    const auto saved_buffers = snapshot_buffers(state);

    state.student->train();
    if (state.teacher) {
        state.teacher->train();
    }

    FrameworkOutput out;
    torch::Tensor loss;
    // Any failure before the optimizer step (including non-finite logits rejected by a loss)
    // must leave the running statistics as they were.
    try {
        switch (cfg.kind) {
            case FrameworkKind::adapted_dino: {
                const auto s = state.student->forward(both).split(batch, 0);
                torch::Tensor t_all;
                {
                    torch::NoGradGuard guard;
                    t_all = state.teacher->forward(both);
                }
                const auto t = t_all.split(batch, 0);
                loss = dino_loss({s[0], s[1]}, {t[0], t[1]}, state.center, cfg.dino);
                out.teacher_logits = t_all;
                out.diagnostics["teacher_entropy"] = softmax_entropy(t_all, state.center, cfg.dino.tau_teacher);
                out.diagnostics["alignment"] = mean_view_cosine(s[0], s[1]);
                out.diagnostics["teacher_spread"] = t_all.std(0, /*unbiased=*/false).mean().item<double>();
                break;
            }
            case FrameworkKind::simclr: {
                const auto z = state.student->forward(both);
                loss = simclr_loss(z, cfg.contrastive.temperature);
                const auto zs = z.split(batch, 0);
                out.diagnostics["alignment"] = mean_view_cosine(zs[0], zs[1]);
                break;
            }
            case FrameworkKind::byol: {
                const auto proj = state.student->forward(both);
                const auto p = state.student->predict(proj).split(batch, 0);
                torch::Tensor target;
                {
                    torch::NoGradGuard guard;
                    target = state.teacher->forward(both);
                }
                const auto z = target.split(batch, 0);
                loss = byol_loss(TwoViews{p[0], p[1]}, TwoViews{z[0], z[1]});
                out.diagnostics["alignment"] = mean_view_cosine(z[0], z[1]);
                break;
            }
            case FrameworkKind::simsiam: {
                const auto proj = state.student->forward(both);
                const auto p = state.student->predict(proj).split(batch, 0);
                const auto z = proj.split(batch, 0);
                loss = simsiam_loss({p[0], p[1]}, {z[0], z[1]});
                out.diagnostics["alignment"] = mean_view_cosine(z[0], z[1]);
                break;
            }
        }

        out.loss = loss.item<double>();
        if (!std::isfinite(out.loss)) {
            throw NumericError("non-finite loss at step " + std::to_string(state.step));
        }
    } catch (...) {
        restore_buffers(state, saved_buffers);
        throw;
    }

    optimizer.zero_grad();
    loss.backward();
    optimizer.step(hyper.learning_rate, hyper.weight_decay);

    if (cfg.kind == FrameworkKind::adapted_dino) {
        ema_update(*state.teacher, *state.student, cfg.dino.teacher_momentum);
        state.center = update_center(state.center, out.teacher_logits, cfg.dino.center_momentum);
    } else if (cfg.kind == FrameworkKind::byol) {
        ema_update(*state.teacher, *state.student, cfg.contrastive.target_momentum);
    }
    ++state.step;
    return out;
}

}  // namespace cxrssl::ssl
