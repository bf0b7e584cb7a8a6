#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrssl/augment.hpp"
#include "cxrssl/backbone.hpp"
#include "cxrssl/checkpoint.hpp"
#include "cxrssl/data.hpp"
#include "cxrssl/metrics.hpp"
#include "cxrssl/optim.hpp"
#include "cxrssl/ssl.hpp"

namespace cxrssl::train {

// ---------------------------------------------------------------------------------------------
// Schedules

enum class LrPolicy { constant, cosine };

std::string to_string(LrPolicy policy);
LrPolicy parse_lr_policy(std::string_view name);

struct LrSchedule {
    double base_lr = 0.0;
    std::int64_t warmup_steps = 0;
    LrPolicy policy = LrPolicy::constant;
};

/// base_lr * step / warmup during warmup (0 at step 0, exactly base_lr at the boundary),
/// then constant or half-cosine to 0 at total_steps. Pure.
double lr_schedule(std::int64_t step, std::int64_t total_steps, const LrSchedule& cfg);

/// start * (1 - t) + end * t with t = step / (total_steps - 1); exact at both ends. Pure.
double wd_schedule(std::int64_t step, std::int64_t total_steps, double wd_start, double wd_end);

// ---------------------------------------------------------------------------------------------
// Pretraining

struct PretrainConfig {
    ssl::FrameworkConfig framework;
    backbone::BackboneConfig backbone;
    optim::OptimizerConfig optimizer;
    augment::AugmentConfig augment;
    double base_lr = 1.25e-4;
    double wd_start = 1e-7;
    double wd_end = 1e-6;
    int epochs = 100;
    int batch_size = 64;
    int warmup_epochs = 0;
    LrPolicy lr_policy = LrPolicy::constant;
    std::uint64_t seed = 0;
    int keep_checkpoints = 2;
    int threads = 1;

    friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

void validate(const PretrainConfig& cfg);
void to_json(nlohmann::json& j, const PretrainConfig& cfg);
void from_json(const nlohmann::json& j, PretrainConfig& cfg);

/// Full-scale row for (framework, backbone kind): optimizer, learning rate and
/// weight-decay bounds, batch 64, 100 epochs, 224px backbone preset.
PretrainConfig full_pretrain_preset(ssl::FrameworkKind framework, backbone::BackboneKind backbone);

/// Desk-scale configuration with the tiny backbone presets and toy head sizes.
PretrainConfig toy_pretrain_preset(ssl::FrameworkKind framework, backbone::BackboneKind backbone);

/// One line of the diagnostics stream.
struct StepRecord {
    int epoch = 0;
    std::int64_t step = 0;
    double loss = 0.0;
    std::optional<double> teacher_entropy;
    std::optional<double> teacher_spread;  ///< mean over K of the batch std of teacher logits
    double alignment = 0.0;
    double learning_rate = 0.0;
    double weight_decay = 0.0;
    bool finite = true;
};

nlohmann::json to_json(const StepRecord& r);

struct PretrainOptions {
    /// Resume from this checkpoint (written by a previous pretrain with the same config).
    std::optional<std::filesystem::path> resume;
    /// Stop after this many completed epochs (testing interrupted runs); 0 runs to the end.
    int stop_after_epochs = 0;
    /// Called after every successful step.
    std::function<void(const StepRecord&, const ssl::SslState&)> on_step;
};

struct PretrainResult {
    std::filesystem::path final_checkpoint;  ///< empty when stopped early
    std::filesystem::path last_checkpoint;
    std::filesystem::path diagnostics;
    std::vector<StepRecord> records;  ///< steps run by this call
    std::int64_t steps = 0;           ///< global step after the call
};

/// Runs epochs x floor(N / batch_size) steps of train_step on two-view batches. Batch order
/// is a function of (seed, epoch); view seeds of (seed, epoch, image, view). Writes
/// `out_dir/diagnostics.jsonl`, `out_dir/checkpoints/epoch_XXXX.ckpt` (last keep_checkpoints
/// kept) and `out_dir/final.ckpt`. Aborts with NumericError after 3 consecutive
/// non-finite steps.
PretrainResult pretrain(const PretrainConfig& cfg, const std::vector<Image>& images,
                        const std::filesystem::path& out_dir, const PretrainOptions& options = {});

/// Full checkpoint: state ("student.", "teacher.", center, step), optimizer ("optim."),
/// metadata {format, kind, config, epoch, step}.
backbone::Checkpoint make_checkpoint(const PretrainConfig& cfg, const ssl::SslState& state,
                                     const optim::Optimizer& optimizer, int epoch);

struct LoadedModel {
    PretrainConfig config;
    ssl::SslState state;
    int epoch = 0;
};

/// Rebuilds the pretraining state from a checkpoint. ArtifactError on version or content mismatch.
LoadedModel load_pretrained(const std::filesystem::path& path);

// ---------------------------------------------------------------------------------------------
// Linear evaluation

struct LinearEvalConfig {
    double base_lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 50;
    int warmup_epochs = 10;
    double momentum = 0.9;
    int batch_size = 256;
    std::vector<double> lr_grid{1e-2, 1e-3, 1e-4};
    std::vector<double> wd_grid{1e-3, 1e-4, 1e-5};
    bool grid_search = true;
    /// Standardize features with train-split statistics before the linear layer.
    bool standardize = true;
    LrPolicy lr_policy = LrPolicy::constant;
    data::PreprocessConfig preprocess;
    std::uint64_t seed = 0;

    friend bool operator==(const LinearEvalConfig&, const LinearEvalConfig&) = default;
};

void validate(const LinearEvalConfig& cfg);
void to_json(nlohmann::json& j, const LinearEvalConfig& cfg);
void from_json(const nlohmann::json& j, LinearEvalConfig& cfg);

/// Full-scale protocol: 50 epochs, 10 warmup, SGD momentum 0.9, 3x3 grid, 224 center crop of 256;
/// batch 256 for the hybrid backbone and 512 otherwise.
LinearEvalConfig full_linear_eval_preset(backbone::BackboneKind backbone);

/// Desk-scale evaluation matched to a (tiny) backbone's input size.
LinearEvalConfig toy_linear_eval_preset(const backbone::BackboneConfig& backbone);

struct GridCell {
    double lr = 0.0;
    double wd = 0.0;
    double score = 0.0;
};

struct GridResult {
    GridCell best;
    std::size_t best_index = 0;
    std::vector<GridCell> cells;  ///< lr-major order of the input grids
};

/// Evaluates every (lr, wd) cell; the best score wins, ties going to the higher lr, then the
/// lower wd.
GridResult grid_search(const std::function<double(double lr, double wd)>& score, const std::vector<double>& lr_grid,
                       const std::vector<double>& wd_grid);

/// Frozen features (N, D) in float64, computed in eval mode without gradients.
torch::Tensor extract_features(backbone::EncoderImpl& encoder, const std::vector<Image>& images, int batch_size = 64);

/// Images prepared for the encoder: preprocess_eval then channel conversion.
std::vector<Image> prepare_eval_images(const std::vector<Image>& images, const data::PreprocessConfig& cfg,
                                       int channels);

struct LinearProbe {
    torch::Tensor weight;  ///< (C, D)
    torch::Tensor bias;    ///< (C)
    torch::Tensor mean;    ///< (D) standardization, zeros when disabled
    torch::Tensor scale;   ///< (D) ones when disabled
    /// (N, C) class scores (softmax probabilities).
    torch::Tensor scores(const torch::Tensor& features) const;
};

/// Trains the linear head on (features, labels) with SGD momentum, warmup and the given lr/wd.
LinearProbe train_probe(const torch::Tensor& features, const std::vector<int>& labels, int num_classes, double lr,
                        double wd, const LinearEvalConfig& cfg);

eval::PredictionSet predict(const LinearProbe& probe, const torch::Tensor& features, const std::vector<int>& labels);

struct LinearEvalResult {
    eval::MetricsReport report;
    GridResult grid;
    std::uint64_t hash_before = 0;
    std::uint64_t hash_after = 0;
};

/// Holdout protocol on precomputed features: grid search on the val split (accuracy), then
/// the selected probe is scored on the test split.
LinearEvalResult linear_eval_features(const torch::Tensor& features, const data::DatasetManifest& manifest,
                                      const LinearEvalConfig& cfg);

/// Holdout protocol from an encoder. Images are the raw manifest images. Throws
/// ArtifactError if the encoder's parameters change.
LinearEvalResult linear_eval(backbone::EncoderImpl& encoder, const data::DatasetManifest& manifest,
                             const std::vector<Image>& images, const LinearEvalConfig& cfg);

/// k-fold protocol: each fold is the test set once; 10% of the remainder (stratified) is the
/// validation set. Reports mean and population std over folds.
LinearEvalResult linear_eval_kfold(backbone::EncoderImpl& encoder, const data::DatasetManifest& manifest,
                                   const std::vector<Image>& images, const LinearEvalConfig& cfg, int k);

/// Loads every image of a manifest.
std::vector<Image> load_images(const data::DatasetManifest& manifest);

}  // namespace cxrssl::train
