#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "cxrssl/backbone.hpp"
#include "cxrssl/cells.hpp"
#include "cxrssl/losses.hpp"
#include "cxrssl/rng.hpp"
#include "cxrssl/ssl.hpp"

namespace gradcheck {

namespace {

using namespace cxrssl;

torch::TensorOptions f64() {
    return torch::TensorOptions().dtype(torch::kFloat64);
}

torch::Tensor leaf(torch::Tensor t) {
    return t.to(torch::kFloat64).detach().requires_grad_(true);
}

double eval_no_grad(const Instance& inst) {
    torch::NoGradGuard guard;
    return inst.loss().item<double>();
}

// Module objective: sum(out * R) for a fixed random R, with every parameter as a leaf.
template <typename Impl, typename Forward>
Instance module_instance(std::shared_ptr<Impl> module, torch::Tensor input, Forward forward, std::uint64_t seed) {
    module->to(torch::kFloat64);
    module->train();
    auto x = leaf(std::move(input));
    torch::Tensor weights;
    {
        torch::NoGradGuard guard;
        const auto probe = forward(module, x);
        torch::manual_seed(seed ^ 0x5eedull);
        weights = torch::randn(probe.sizes(), f64());
    }
    Instance inst;
    inst.leaves.push_back(x);
    for (auto& p : module->parameters()) {
        if (p.requires_grad()) inst.leaves.push_back(p);
    }
    inst.loss = [module, x, weights, forward]() { return (forward(module, x) * weights).sum(); };
    inst.keep_alive = module;
    return inst;
}

backbone::StageSpec small_stage(std::int64_t in_dim, std::int64_t dim, std::int64_t ratio, std::int64_t index) {
    backbone::StageSpec s;
    s.in_dim = in_dim;
    s.dim = dim;
    s.heads = 2;
    s.window = 3;  // 4x4 and 5x5 grids exercise padding and masking
    s.ratio = ratio;
    s.mlp_ratio = 2.0;
    s.stage_index = index;
    return s;
}

Instance encoder_instance(backbone::BackboneConfig cfg, std::uint64_t seed) {
    torch::manual_seed(seed);
    auto enc = backbone::make_encoder(cfg);
    auto input = torch::rand({2, cfg.in_channels, cfg.image_size, cfg.image_size});
    return module_instance(enc, input, [](const auto& m, const torch::Tensor& x) { return m->forward(x); }, seed);
}

}  // namespace

double relative_error(const Instance& inst, std::uint64_t seed, int coords, double eps) {
    for (auto& l : inst.leaves) {
        if (l.grad().defined()) l.mutable_grad().zero_();
    }
    inst.loss().backward();
    std::vector<torch::Tensor> grads;
    double gnorm2 = 0.0;
    for (auto& l : inst.leaves) {
        grads.push_back(l.grad().defined() ? l.grad().detach().clone() : torch::zeros_like(l));
        gnorm2 += grads.back().pow(2).sum().item<double>();
    }

    Rng rng(seed);
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    for (int c = 0; c < coords; ++c) {
        const auto li = static_cast<std::size_t>(c) % inst.leaves.size();
        auto flat = inst.leaves[li].detach().view({-1});
        const auto idx = uniform_int(rng, 0, flat.numel() - 1);
        const double orig = flat[idx].item<double>();
        flat[idx] = orig + eps;
        const double up = eval_no_grad(inst);
        flat[idx] = orig - eps;
        const double down = eval_no_grad(inst);
        flat[idx] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = grads[li].view({-1})[idx].item<double>();
        diff2 += (numeric - analytic) * (numeric - analytic);
        a2 += analytic * analytic;
        n2 += numeric * numeric;
    }
    double err = 0.0;
    const double denom = std::sqrt(std::max(a2, n2));
    if (denom > 1e-12) err = std::sqrt(diff2) / denom;

    const double gnorm = std::sqrt(gnorm2);
    if (gnorm > 1e-12) {
        auto shift = [&](double step) {
            torch::NoGradGuard guard;
            for (std::size_t i = 0; i < inst.leaves.size(); ++i) {
                inst.leaves[i].add_(grads[i], step / gnorm);
            }
        };
        shift(eps);
        const double up = eval_no_grad(inst);
        shift(-2.0 * eps);
        const double down = eval_no_grad(inst);
        shift(eps);
        const double numeric = (up - down) / (2.0 * eps);
        err = std::max(err, std::abs(numeric - gnorm) / gnorm);
    }
    return err;
}

std::vector<Case> loss_cases() {
    std::vector<Case> cases;
    cases.push_back({"dino_loss", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         const int b = 3;
                         const int k = 5;
                         auto s1 = leaf(torch::randn({b, k}));
                         auto s2 = leaf(torch::randn({b, k}));
                         const auto t1 = torch::randn({b, k}, f64());
                         const auto t2 = torch::randn({b, k}, f64());
                         const auto center = torch::randn({k}, f64()) * 0.1;
                         ssl::DinoConfig cfg;
                         Instance inst;
                         inst.leaves = {s1, s2};
                         inst.loss = [=]() { return ssl::dino_loss({s1, s2}, {t1, t2}, center, cfg); };
                         return inst;
                     }});
    cases.push_back({"simclr_loss", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         auto z = leaf(torch::randn({6, 4}));
                         Instance inst;
                         inst.leaves = {z};
                         inst.loss = [=]() { return ssl::simclr_loss(z, 0.2); };
                         return inst;
                     }});
    cases.push_back({"byol_loss", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         auto p1 = leaf(torch::randn({3, 4}));
                         auto p2 = leaf(torch::randn({3, 4}));
                         const auto z1 = torch::randn({3, 4}, f64());
                         const auto z2 = torch::randn({3, 4}, f64());
                         Instance inst;
                         inst.leaves = {p1, p2};
                         inst.loss = [=]() { return ssl::byol_loss(ssl::TwoViews{p1, p2}, ssl::TwoViews{z1, z2}); };
                         return inst;
                     }});
    cases.push_back({"simsiam_loss", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         auto p1 = leaf(torch::randn({3, 4}));
                         auto p2 = leaf(torch::randn({3, 4}));
                         const auto z1 = torch::randn({3, 4}, f64());
                         const auto z2 = torch::randn({3, 4}, f64());
                         Instance inst;
                         inst.leaves = {p1, p2};
                         inst.loss = [=]() { return ssl::simsiam_loss({p1, p2}, {z1, z2}); };
                         return inst;
                     }});
    return cases;
}

std::vector<Case> block_cases() {
    using namespace backbone;
    std::vector<Case> cases;
    cases.push_back({"window_attention", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         WindowAttention m(8, 2, 3);
                         // 5x5 grid with window 3: padded to 6x6 with masked keys.
                         auto x = torch::randn({2, 25, 8});
                         return module_instance(m.ptr(), x, [](const auto& a, const torch::Tensor& t) {
                             return a->forward(t, 5, 5);
                         }, seed);
                     }});
    cases.push_back({"feed_forward", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         FeedForward m(6, 12);
                         return module_instance(m.ptr(), torch::randn({2, 5, 6}),
                                                [](const auto& f, const torch::Tensor& t) { return f->forward(t); },
                                                seed);
                     }});
    cases.push_back({"pyramid_reduction", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         PyramidReduction m(small_stage(3, 8, 4, 0));
                         return module_instance(m.ptr(), torch::rand({2, 3, 16, 16}),
                                                [](const auto& p, const torch::Tensor& t) {
                                                    return p->forward(t).tokens;
                                                },
                                                seed);
                     }});
    cases.push_back({"parallel_conv", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ParallelConv m(4, 8, 4);
                         return module_instance(m.ptr(), torch::randn({2, 4, 8, 8}),
                                                [](const auto& p, const torch::Tensor& t) { return p->forward(t); },
                                                seed);
                     }});
    cases.push_back({"parallel_conv_ratio1", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ParallelConv m(8, 8, 1);
                         return module_instance(m.ptr(), torch::randn({2, 8, 5, 5}),
                                                [](const auto& p, const torch::Tensor& t) { return p->forward(t); },
                                                seed);
                     }});
    cases.push_back({"reduction_cell", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ReductionCell m(small_stage(3, 8, 4, 0));
                         return module_instance(m.ptr(), torch::rand({2, 3, 16, 16}),
                                                [](const auto& r, const torch::Tensor& t) {
                                                    return r->forward(t).tokens;
                                                },
                                                seed);
                     }});
    cases.push_back({"reduction_cell_stage1", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ReductionCell m(small_stage(8, 12, 2, 1));
                         return module_instance(m.ptr(), torch::randn({2, 8, 10, 10}),
                                                [](const auto& r, const torch::Tensor& t) {
                                                    return r->forward(t).tokens;
                                                },
                                                seed);
                     }});
    cases.push_back({"normal_cell", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         NormalCell m(small_stage(8, 8, 1, 1));
                         return module_instance(m.ptr(), torch::randn({2, 25, 8}),
                                                [](const auto& n, const torch::Tensor& t) {
                                                    return n->forward(TokenGrid{t, 5, 5}).tokens;
                                                },
                                                seed);
                     }});
    cases.push_back({"dino_head", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ssl::DinoConfig cfg;
                         cfg.out_dim = 7;
                         cfg.hidden_dim = 10;
                         cfg.bottleneck_dim = 5;
                         ssl::DinoHead m(6, cfg);
                         return module_instance(m.ptr(), torch::randn({4, 6}),
                                                [](const auto& h, const torch::Tensor& t) { return h->forward(t); },
                                                seed);
                     }});
    cases.push_back({"projection_mlp", [](std::uint64_t seed) {
                         torch::manual_seed(seed);
                         ssl::ProjectionMlp m(6, 10, 5, 3, true);
                         return module_instance(m.ptr(), torch::randn({4, 6}),
                                                [](const auto& p, const torch::Tensor& t) {
                                                    return p->forward(t);
                                                },
                                                seed);
                     }});
    cases.push_back({"encoder_vitaev2", [](std::uint64_t seed) {
                         auto cfg = BackboneConfig::tiny_vitaev2();
                         cfg.image_size = 16;
                         return encoder_instance(cfg, seed);
                     }});
    cases.push_back({"encoder_vit", [](std::uint64_t seed) {
                         auto cfg = BackboneConfig::tiny_vit();
                         cfg.image_size = 16;
                         return encoder_instance(cfg, seed);
                     }});
    cases.push_back({"encoder_resnet", [](std::uint64_t seed) {
                         auto cfg = BackboneConfig::tiny_resnet();
                         cfg.image_size = 16;
                         return encoder_instance(cfg, seed);
                     }});
    return cases;
}

std::vector<SuiteResult> run_suite(const std::vector<Case>& cases, int instances) {
    std::vector<SuiteResult> out;
    for (const auto& c : cases) {
        SuiteResult r{c.name, 0, 0.0};
        for (int i = 0; i < instances; ++i) {
            const auto seed = derive_seed(0x9c4d, static_cast<std::uint64_t>(i));
            const auto inst = c.make(seed);
            r.max_error = std::max(r.max_error, relative_error(inst, seed));
            ++r.instances;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace gradcheck
