#include <algorithm>
#include <fstream>
#include <sstream>

#include <torch/torch.h>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/rng.hpp"
#include "cxrssl/train.hpp"

namespace cxrssl::train {

namespace fs = std::filesystem;

nlohmann::json to_json(const StepRecord& r) {
    nlohmann::json j{{"epoch", r.epoch},
                     {"step", r.step},
                     {"finite", r.finite},
                     {"learning_rate", r.learning_rate},
                     {"weight_decay", r.weight_decay}};
    if (r.finite) {
        j["loss"] = r.loss;
        j["alignment"] = r.alignment;
        if (r.teacher_entropy) j["teacher_entropy"] = *r.teacher_entropy;
        if (r.teacher_spread) j["teacher_spread"] = *r.teacher_spread;
    }
    return j;
}

backbone::Checkpoint make_checkpoint(const PretrainConfig& cfg, const ssl::SslState& state,
                                     const optim::Optimizer& optimizer, int epoch) {
    backbone::Checkpoint ckpt;
    ckpt.metadata = {{"kind", "pretrain"}, {"config", cfg}, {"epoch", epoch}, {"step", state.step}};
    ssl::export_state(state, ckpt.tensors);
    optimizer.export_state(ckpt.tensors, "optim.");
    return ckpt;
}

namespace {

PretrainConfig config_of(const backbone::Checkpoint& ckpt, const fs::path& path) {
    if (ckpt.metadata.value("kind", "") != "pretrain" || !ckpt.metadata.contains("config")) {
        throw ArtifactError("'" + path.string() + "' is not a pretraining checkpoint");
    }
    try {
        return ckpt.metadata.at("config").get<PretrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError("'" + path.string() + "' has an unreadable config: " + e.what());
    } catch (const ConfigError& e) {
        throw ArtifactError("'" + path.string() + "' has an invalid config: " + e.what());
    }
}

ssl::SslState restore_state(const PretrainConfig& cfg, const backbone::Checkpoint& ckpt) {
    auto state = ssl::make_ssl_state(cfg.backbone, cfg.framework, cfg.seed);
    ssl::import_state(state, ckpt.tensors);
    return state;
}

torch::Tensor view_batch(const std::vector<Image>& views) {
    return to_tensor(std::span<const Image>(views));
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw ArtifactError("cannot write '" + path.string() + "'");
}

std::string epoch_name(int epoch) {
    std::string digits = std::to_string(epoch);
    return "epoch_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits + ".ckpt";
}

}  // namespace

LoadedModel load_pretrained(const fs::path& path) {
    const auto ckpt = backbone::load_checkpoint(path);
    LoadedModel m;
    m.config = config_of(ckpt, path);
    m.state = restore_state(m.config, ckpt);
    m.epoch = ckpt.metadata.value("epoch", 0);
    return m;
}

PretrainResult pretrain(const PretrainConfig& cfg, const std::vector<Image>& images, const fs::path& out_dir,
                        const PretrainOptions& options) {
    validate(cfg);
    if (images.empty()) {
        throw DataError("pretrain: no images");
    }
    const auto n = static_cast<std::int64_t>(images.size());
    const std::int64_t steps_per_epoch = n / cfg.batch_size;
    if (steps_per_epoch < 1) {
        throw ConfigError("pretrain: batch_size " + std::to_string(cfg.batch_size) + " exceeds the " + std::to_string(n) +
                          " images");
    }
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const LrSchedule lr_cfg{cfg.base_lr, steps_per_epoch * cfg.warmup_epochs, cfg.lr_policy};
    torch::set_num_threads(cfg.threads);

    auto state = ssl::make_ssl_state(cfg.backbone, cfg.framework, cfg.seed);
    optim::Optimizer optimizer(optim::trainable_parameters(*state.student), cfg.optimizer);
    int start_epoch = 0;

    fs::create_directories(out_dir / "checkpoints");
    PretrainResult result;
    result.diagnostics = out_dir / "diagnostics.jsonl";
    std::vector<std::string> kept_lines;
    if (options.resume) {
        const auto ckpt = backbone::load_checkpoint(*options.resume);
        const auto saved = config_of(ckpt, *options.resume);
        if (!(saved == cfg)) {
            throw ArtifactError("resume checkpoint was written with a different config");
        }
        ssl::import_state(state, ckpt.tensors);
        optimizer.import_state(ckpt.tensors, "optim.");
        start_epoch = ckpt.metadata.at("epoch").get<int>();
        // Keep the diagnostics written before the checkpoint so the stream matches an
        // uninterrupted run.
        std::ifstream in(result.diagnostics);
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            if (nlohmann::json::parse(line).at("step").get<std::int64_t>() < state.step) kept_lines.push_back(line);
        }
    }
    write_lines(result.diagnostics, kept_lines);
    std::ofstream diag(result.diagnostics, std::ios::binary | std::ios::app);

    // Earlier epoch checkpoints count towards keep_checkpoints; later ones are stale.
    std::vector<fs::path> epoch_checkpoints;
    for (int e = 1; e <= cfg.epochs; ++e) {
        const auto path = out_dir / "checkpoints" / epoch_name(e);
        if (!fs::exists(path)) continue;
        if (e <= start_epoch) {
            epoch_checkpoints.push_back(path);
        } else {
            fs::remove(path);
        }
    }
    int consecutive_failures = 0;
    std::vector<std::size_t> order(images.size());
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng order_rng(derive_seed(cfg.seed, 0x0bde7, static_cast<std::uint64_t>(epoch)));
        shuffle(std::span<std::size_t>(order), order_rng);

        for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
            std::vector<Image> v1, v2;
            v1.reserve(static_cast<std::size_t>(cfg.batch_size));
            v2.reserve(static_cast<std::size_t>(cfg.batch_size));
            for (std::int64_t k = 0; k < cfg.batch_size; ++k) {
                const auto idx = order[static_cast<std::size_t>(b * cfg.batch_size + k)];
                const auto pair = augment::make_view_pair(images[idx], derive_seed(cfg.seed, epoch, idx, 0),
                                                          derive_seed(cfg.seed, epoch, idx, 1), cfg.augment);
                v1.push_back(convert_channels(pair.view1, cfg.backbone.in_channels));
                v2.push_back(convert_channels(pair.view2, cfg.backbone.in_channels));
            }
            StepRecord rec;
            rec.epoch = epoch;
            rec.step = state.step;
            rec.learning_rate = lr_schedule(state.step, total_steps, lr_cfg);
            rec.weight_decay = wd_schedule(state.step, total_steps, cfg.wd_start, cfg.wd_end);
            try {
                const auto out = ssl::train_step(state, optimizer, {view_batch(v1), view_batch(v2)}, cfg.framework,
                                                 {rec.learning_rate, rec.weight_decay});
                rec.loss = out.loss;
                rec.alignment = out.diagnostics.at("alignment");
                if (const auto it = out.diagnostics.find("teacher_entropy"); it != out.diagnostics.end()) {
                    rec.teacher_entropy = it->second;
                }
                if (const auto it = out.diagnostics.find("teacher_spread"); it != out.diagnostics.end()) {
                    rec.teacher_spread = it->second;
                }
                consecutive_failures = 0;
            } catch (const NumericError& e) {
                rec.finite = false;
                ++state.step;  // the slot is consumed so schedules stay aligned with the batch index
                if (++consecutive_failures >= 3) {
                    diag << to_json(rec).dump() << '\n';
                    throw NumericError(std::string("pretrain aborted after 3 consecutive non-finite steps: ") + e.what());
                }
            }
            diag << to_json(rec).dump() << '\n';
            result.records.push_back(rec);
            if (options.on_step && rec.finite) options.on_step(rec, state);
        }
        diag.flush();

        const auto path = out_dir / "checkpoints" / epoch_name(epoch + 1);
        backbone::save_checkpoint(make_checkpoint(cfg, state, optimizer, epoch + 1), path);
        result.last_checkpoint = path;
        epoch_checkpoints.push_back(path);
        while (static_cast<int>(epoch_checkpoints.size()) > cfg.keep_checkpoints) {
            fs::remove(epoch_checkpoints.front());
            epoch_checkpoints.erase(epoch_checkpoints.begin());
        }
        if (options.stop_after_epochs > 0 && epoch + 1 >= options.stop_after_epochs && epoch + 1 < cfg.epochs) {
            result.steps = state.step;
            return result;
        }
    }
    result.final_checkpoint = out_dir / "final.ckpt";
    backbone::save_checkpoint(make_checkpoint(cfg, state, optimizer, cfg.epochs), result.final_checkpoint);
    result.steps = state.step;
    return result;
}

}  // namespace cxrssl::train
