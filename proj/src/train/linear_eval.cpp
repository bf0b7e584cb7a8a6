#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/rng.hpp"
#include "cxrssl/train.hpp"

namespace cxrssl::train {

GridResult grid_search(const std::function<double(double, double)>& score, const std::vector<double>& lr_grid,
                       const std::vector<double>& wd_grid) {
    if (lr_grid.empty() || wd_grid.empty()) {
        throw ConfigError("grid_search: grids must be non-empty");
    }
    GridResult result;
    for (const double lr : lr_grid) {
        for (const double wd : wd_grid) {
            result.cells.push_back({lr, wd, score(lr, wd)});
        }
    }
    auto better = [](const GridCell& a, const GridCell& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.lr != b.lr) return a.lr > b.lr;
        return a.wd < b.wd;
    };
    for (std::size_t i = 1; i < result.cells.size(); ++i) {
        if (better(result.cells[i], result.cells[result.best_index])) result.best_index = i;
    }
    result.best = result.cells[result.best_index];
    return result;
}

std::vector<Image> prepare_eval_images(const std::vector<Image>& images, const data::PreprocessConfig& cfg,
                                       int channels) {
    data::PreprocessConfig c = cfg;
    c.channels = channels;
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(data::preprocess_eval(img, c));
    return out;
}

torch::Tensor extract_features(backbone::EncoderImpl& encoder, const std::vector<Image>& images, int batch_size) {
    if (images.empty()) {
        throw DataError("extract_features: no images");
    }
    const bool was_training = encoder.is_training();
    encoder.eval();
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> chunks;
    for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto count = std::min(images.size() - start, static_cast<std::size_t>(batch_size));
        const auto batch = to_tensor(std::span<const Image>(images.data() + start, count));
        chunks.push_back(backbone::forward_backbone(encoder, batch).to(torch::kFloat64));
    }
    encoder.train(was_training);
    return torch::cat(chunks, 0);
}

torch::Tensor LinearProbe::scores(const torch::Tensor& features) const {
    torch::NoGradGuard guard;
    const auto z = (features - mean) / scale;
    return torch::softmax(torch::addmm(bias, z, weight.t()), 1);
}

LinearProbe train_probe(const torch::Tensor& features, const std::vector<int>& labels, int num_classes, double lr,
                        double wd, const LinearEvalConfig& cfg) {
    const auto n = features.size(0);
    const auto d = features.size(1);
    if (n != static_cast<std::int64_t>(labels.size()) || n == 0) {
        throw DataError("train_probe: features and labels differ in length or are empty");
    }
    for (const int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw DataError("train_probe: label " + std::to_string(label) + " does not fit a " +
                            std::to_string(num_classes) + "-class head");
        }
    }
    LinearProbe probe;
    if (cfg.standardize) {
        probe.mean = features.mean(0);
        probe.scale = features.std(0, /*unbiased=*/false) + 1e-6;
    } else {
        probe.mean = torch::zeros({d}, torch::kFloat64);
        probe.scale = torch::ones({d}, torch::kFloat64);
    }
    const auto z = (features - probe.mean) / probe.scale;
    const auto y = torch::tensor(std::vector<std::int64_t>(labels.begin(), labels.end()), torch::kInt64);

    // Uniform(-1/sqrt(D), 1/sqrt(D)) from the portable generator.
    Rng init_rng(derive_seed(cfg.seed, 0x9be4));
    std::vector<double> w(static_cast<std::size_t>(num_classes * d));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& v : w) v = uniform(init_rng, -bound, bound);
    probe.weight = torch::tensor(w, torch::kFloat64).reshape({num_classes, d}).set_requires_grad(true);
    probe.bias = torch::zeros({num_classes}, torch::kFloat64).set_requires_grad(true);

    optim::OptimizerConfig ocfg;
    ocfg.kind = optim::OptimizerKind::sgd;
    ocfg.momentum = cfg.momentum;
    optim::Optimizer opt({{"weight", probe.weight, false}, {"bias", probe.bias, true}}, ocfg);

    const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, n);
    const std::int64_t steps_per_epoch = (n + batch - 1) / batch;
    const std::int64_t total = steps_per_epoch * cfg.epochs;
    const LrSchedule schedule{lr, steps_per_epoch * cfg.warmup_epochs, cfg.lr_policy};
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
        Rng rng(derive_seed(cfg.seed, 0x11ea, static_cast<std::uint64_t>(epoch)));
        shuffle(std::span<std::int64_t>(order), rng);
        for (std::int64_t s = 0; s < steps_per_epoch; ++s, ++step) {
            const auto begin = order.begin() + s * batch;
            const auto end = order.begin() + std::min(n, (s + 1) * batch);
            const auto idx = torch::tensor(std::vector<std::int64_t>(begin, end), torch::kInt64);
            const auto logits = torch::addmm(probe.bias, z.index_select(0, idx), probe.weight.t());
            const auto loss = torch::nn::functional::cross_entropy(logits, y.index_select(0, idx));
            opt.zero_grad();
            loss.backward();
            opt.step(lr_schedule(step, total, schedule), wd);
        }
    }
    probe.weight = probe.weight.detach();
    probe.bias = probe.bias.detach();
    return probe;
}

eval::PredictionSet predict(const LinearProbe& probe, const torch::Tensor& features, const std::vector<int>& labels) {
    const auto s = probe.scores(features).contiguous();
    eval::PredictionSet p;
    p.num_classes = static_cast<int>(s.size(1));
    p.scores.assign(s.data_ptr<double>(), s.data_ptr<double>() + s.numel());
    p.labels = labels;
    return p;
}

namespace {

struct SplitData {
    torch::Tensor features;
    std::vector<int> labels;
};

SplitData gather(const torch::Tensor& features, const data::DatasetManifest& m, data::Split split) {
    const auto idx = m.indices(split);
    SplitData out;
    std::vector<std::int64_t> rows;
    for (const auto i : idx) {
        const auto& r = m.records[i];
        if (!r.label) {
            throw DataError("linear evaluation: record '" + r.path + "' has no label");
        }
        rows.push_back(static_cast<std::int64_t>(i));
        out.labels.push_back(*r.label);
    }
    out.features = features.index_select(0, torch::tensor(rows, torch::kInt64));
    return out;
}

double accuracy_of(const LinearProbe& probe, const SplitData& d) {
    return eval::accuracy(predict(probe, d.features, d.labels));
}

}  // namespace

LinearEvalResult linear_eval_features(const torch::Tensor& features, const data::DatasetManifest& manifest,
                                      const LinearEvalConfig& cfg) {
    validate(cfg);
    const int k = manifest.num_classes();
    if (k < 2) {
        throw DataError("linear evaluation needs at least two classes");
    }
    if (features.size(0) != static_cast<std::int64_t>(manifest.records.size())) {
        throw ShapeError("linear evaluation: one feature row per manifest record expected");
    }
    const auto train = gather(features, manifest, data::Split::train);
    const auto test = gather(features, manifest, data::Split::test);
    if (train.labels.empty() || test.labels.empty()) {
        throw DataError("linear evaluation needs non-empty train and test splits");
    }
    LinearEvalResult result;
    if (cfg.grid_search) {
        const auto val = gather(features, manifest, data::Split::val);
        if (val.labels.empty()) {
            throw DataError("grid search needs a non-empty val split");
        }
        result.grid = grid_search(
            [&](double lr, double wd) { return accuracy_of(train_probe(train.features, train.labels, k, lr, wd, cfg), val); },
            cfg.lr_grid, cfg.wd_grid);
    } else {
        result.grid.best = {cfg.base_lr, cfg.weight_decay, 0.0};
        result.grid.cells = {result.grid.best};
    }
    const auto probe = train_probe(train.features, train.labels, k, result.grid.best.lr, result.grid.best.wd, cfg);
    result.report = eval::evaluate(predict(probe, test.features, test.labels));
    auto cells = nlohmann::json::array();
    for (const auto& c : result.grid.cells) cells.push_back({{"lr", c.lr}, {"wd", c.wd}, {"val_accuracy", c.score}});
    result.report.extra = {{"lr", result.grid.best.lr},
                           {"wd", result.grid.best.wd},
                           {"grid", cells},
                           {"n_train", train.labels.size()},
                           {"n_test", test.labels.size()}};
    return result;
}

namespace {

torch::Tensor frozen_features(backbone::EncoderImpl& encoder, const std::vector<Image>& images,
                              const LinearEvalConfig& cfg) {
    const auto& bcfg = encoder.config();
    if (cfg.preprocess.crop != bcfg.image_size) {
        throw ConfigError("eval.preprocess.crop (" + std::to_string(cfg.preprocess.crop) +
                          ") does not match the backbone input size " + std::to_string(bcfg.image_size));
    }
    return extract_features(encoder, prepare_eval_images(images, cfg.preprocess, bcfg.in_channels),
                            std::max(1, std::min(cfg.batch_size, 256)));
}

}  // namespace

LinearEvalResult linear_eval(backbone::EncoderImpl& encoder, const data::DatasetManifest& manifest,
                             const std::vector<Image>& images, const LinearEvalConfig& cfg) {
    if (images.size() != manifest.records.size()) {
        throw DataError("linear_eval: one image per manifest record expected");
    }
    const auto before = backbone::parameter_hash(encoder);
    const auto features = frozen_features(encoder, images, cfg);
    auto result = linear_eval_features(features, manifest, cfg);
    result.hash_before = before;
    result.hash_after = backbone::parameter_hash(encoder);
    if (result.hash_before != result.hash_after) {
        throw ArtifactError("backbone parameters changed during linear evaluation");
    }
    return result;
}

LinearEvalResult linear_eval_kfold(backbone::EncoderImpl& encoder, const data::DatasetManifest& manifest,
                                   const std::vector<Image>& images, const LinearEvalConfig& cfg, int k) {
    if (images.size() != manifest.records.size()) {
        throw DataError("linear_eval_kfold: one image per manifest record expected");
    }
    const auto before = backbone::parameter_hash(encoder);
    const auto features = frozen_features(encoder, images, cfg);
    const auto folds = data::split_kfold(manifest, k, cfg.seed);
    std::vector<eval::MetricsReport> reports;
    for (int f = 0; f < k; ++f) {
        // Validation split carved from the training folds, stratified.
        data::DatasetManifest rest;
        rest.class_names = manifest.class_names;
        const auto rest_idx = folds.complement(f);
        for (const auto i : rest_idx) rest.records.push_back(manifest.records[i]);
        rest = data::split_holdout(rest, 0.9, 0.1, derive_seed(cfg.seed, 0xf01d, static_cast<std::uint64_t>(f)));
        data::DatasetManifest fold_manifest = manifest;
        for (auto& r : fold_manifest.records) r.split = data::Split::test;
        for (std::size_t j = 0; j < rest_idx.size(); ++j) {
            fold_manifest.records[rest_idx[j]].split = rest.records[j].split;
        }
        auto fold = linear_eval_features(features, fold_manifest, cfg);
        fold.report.extra["lr"] = fold.grid.best.lr;
        fold.report.extra["weight_decay"] = fold.grid.best.wd;
        reports.push_back(std::move(fold.report));
    }
    LinearEvalResult result;
    result.report = eval::aggregate_folds(reports);
    result.hash_before = before;
    result.hash_after = backbone::parameter_hash(encoder);
    if (result.hash_before != result.hash_after) {
        throw ArtifactError("backbone parameters changed during linear evaluation");
    }
    return result;
}

std::vector<Image> load_images(const data::DatasetManifest& manifest) {
    std::vector<Image> out;
    out.reserve(manifest.records.size());
    for (const auto& r : manifest.records) out.push_back(data::load_image(manifest.resolve(r)));
    return out;
}

}  // namespace cxrssl::train
