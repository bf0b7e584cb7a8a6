#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/cli.hpp"
#include "cxrssl/config_json.hpp"
#include "cxrssl/data.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/metrics.hpp"

namespace cxrssl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Run records

void to_json(json& j, const RunRecord& r) {
    j = {{"id", r.id},
         {"command", r.command},
         {"config", r.config},
         {"started", r.started},
         {"finished", r.finished},
         {"status", r.status},
         {"artifacts", r.artifacts}};
}

void from_json(const json& j, RunRecord& r) {
    j.at("id").get_to(r.id);
    j.at("command").get_to(r.command);
    r.config = j.at("config");
    j.at("started").get_to(r.started);
    j.at("finished").get_to(r.finished);
    j.at("status").get_to(r.status);
    j.at("artifacts").get_to(r.artifacts);
}

namespace {

constexpr const char* kRunFile = "run.json";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Writes through a temporary so readers never see a half-written file.
void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw ArtifactError("cannot write '" + path.string() + "'");
    }
    fs::rename(tmp, path);
}

}  // namespace

std::optional<RunRecord> read_run_record(const fs::path& run_dir) {
    const auto path = run_dir / kRunFile;
    if (!fs::exists(path)) return std::nullopt;
    try {
        return json::parse(read_file(path)).get<RunRecord>();
    } catch (const json::exception& e) {
        throw ArtifactError("corrupt run record '" + path.string() + "': " + e.what());
    }
}

void write_run_record(const fs::path& run_dir, const RunRecord& record) {
    write_file(run_dir / kRunFile, json(record).dump(2) + "\n");
}

std::string network_name(backbone::BackboneKind kind) {
    switch (kind) {
        case backbone::BackboneKind::vitaev2: return "ViTAEv2";
        case backbone::BackboneKind::vit: return "ViT-S/16";
        case backbone::BackboneKind::resnet50: return "ResNet-50";
    }
    return "?";
}

std::string framework_name(ssl::FrameworkKind kind) {
    switch (kind) {
        case ssl::FrameworkKind::adapted_dino: return "Adapted DINO";
        case ssl::FrameworkKind::simclr: return "SimCLR";
        case ssl::FrameworkKind::byol: return "BYOL";
        case ssl::FrameworkKind::simsiam: return "SimSiam";
    }
    return "?";
}

std::string format_params(std::int64_t count) {
    const double millions = static_cast<double>(count) / 1e6;
    std::ostringstream s;
    s << std::fixed << std::setprecision(millions < 1.0 ? 3 : 2) << millions;
    return s.str();
}

int exit_code_for(std::exception_ptr error) {
    try {
        std::rethrow_exception(error);
    } catch (const NumericError&) {
        return 4;
    } catch (const ArtifactError&) {
        return 3;
    } catch (const Error&) {
        return 2;
    } catch (const CLI::Error&) {
        return 2;
    } catch (const json::exception&) {
        return 2;
    } catch (const fs::filesystem_error&) {
        return 3;
    } catch (...) {
        return 1;
    }
}

namespace {

// ---------------------------------------------------------------------------------------------
// Helpers

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& path) {
    return hex64(backbone::fnv1a64(read_file(path)));
}

json file_echo(const fs::path& path) {
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open '" + path.string() + "'");
    return {{"path", path.string()}, {"hash", file_hash(path)}};
}

std::string error_kind(std::exception_ptr error) {
    try {
        std::rethrow_exception(error);
    } catch (const ConfigError&) {
        return "config";
    } catch (const ParseError&) {
        return "parse";
    } catch (const DataError&) {
        return "data";
    } catch (const ShapeError&) {
        return "shape";
    } catch (const UndefinedMetricError&) {
        return "metric";
    } catch (const ArtifactError&) {
        return "artifact";
    } catch (const NumericError&) {
        return "numeric";
    } catch (const CLI::Error&) {
        return "usage";
    } catch (const json::exception&) {
        return "config";
    } catch (const fs::filesystem_error&) {
        return "artifact";
    } catch (...) {
        return "internal";
    }
}

std::string error_message(std::exception_ptr error) {
    try {
        std::rethrow_exception(error);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

struct Context {
    fs::path run_root;
    bool force = false;
    std::ostream& out;
    std::ostream& err;
};

std::vector<std::vector<std::string>> metric_rows(const eval::MetricsReport& r) {
    return {{"ACC", eval::format_percent(r.accuracy)},
            {"AUC", eval::format_fraction(r.auc)},
            {"F1", eval::format_fraction(r.f1)},
            {"Precision", eval::format_fraction(r.precision)},
            {"Recall", eval::format_fraction(r.recall)}};
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
    const auto ckpts = dir / "checkpoints";
    if (!fs::is_directory(ckpts)) return std::nullopt;
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(ckpts)) {
        if (e.path().extension() == ".ckpt") found.push_back(e.path());
    }
    if (found.empty()) return std::nullopt;
    std::sort(found.begin(), found.end());
    return found.back();
}

// ---------------------------------------------------------------------------------------------
// Pretraining

struct RunOutcome {
    fs::path dir;
    RunRecord record;
    bool cached = false;
};

RunOutcome run_pretrain(const ResolvedConfig& cfg, const Context& ctx) {
    if (!cfg.manifest) throw ConfigError("data.manifest is not set");
    const auto manifest = data::load_manifest(*cfg.manifest);
    RunRecord rec;
    rec.command = "pretrain";
    rec.config = {{"pretrain", cfg.pretrain}, {"manifest", file_echo(*cfg.manifest)}};
    rec.id = run_id({{"command", rec.command}, {"config", rec.config}});
    const auto dir = ctx.run_root / ("pretrain-" + rec.id);

    if (ctx.force) fs::remove_all(dir);
    if (const auto prev = read_run_record(dir); prev && prev->status == "complete") {
        return {dir, *prev, true};
    }
    train::PretrainOptions options;
    // An interrupted run continues from its last checkpoint.
    options.resume = latest_checkpoint(dir);
    rec.started = utc_now();
    write_run_record(dir, rec);

    const auto images = train::load_images(manifest);
    try {
        train::pretrain(cfg.pretrain, images, dir, options);
    } catch (...) {
        rec.status = "failed";
        rec.finished = utc_now();
        write_run_record(dir, rec);
        throw;
    }
    rec.artifacts = {{"final_checkpoint", "final.ckpt"},
                     {"diagnostics", "diagnostics.jsonl"},
                     {"checkpoints", "checkpoints"}};
    rec.status = "complete";
    rec.finished = utc_now();
    write_run_record(dir, rec);
    return {dir, rec, false};
}

// ---------------------------------------------------------------------------------------------
// Linear evaluation

RunOutcome run_linear_eval(const ConfigDocument& doc, const ResolvedConfig& cfg, const fs::path& checkpoint,
                           const std::optional<fs::path>& manifest_override, const Context& ctx) {
    if (!fs::exists(checkpoint)) throw ArtifactError("checkpoint '" + checkpoint.string() + "' does not exist");
    auto loaded = train::load_pretrained(checkpoint);
    const auto ecfg = resolve_eval_config(doc, loaded.config.backbone);
    fs::path manifest_path;
    if (manifest_override) {
        manifest_path = fs::absolute(*manifest_override).lexically_normal();
    } else if (cfg.eval_manifest) {
        manifest_path = *cfg.eval_manifest;
    } else if (cfg.manifest) {
        manifest_path = *cfg.manifest;
    } else {
        throw ConfigError("no evaluation manifest: pass --manifest or set data.eval_manifest");
    }
    const auto manifest = data::load_manifest(manifest_path);

    RunRecord rec;
    rec.command = "linear-eval";
    rec.config = {{"checkpoint", {{"path", fs::absolute(checkpoint).lexically_normal().string()},
                                  {"hash", file_hash(checkpoint)}}},
                  {"eval", ecfg},
                  {"manifest", file_echo(manifest_path)},
                  {"folds", cfg.folds}};
    // The checkpoint enters the id by content, not by location.
    json id_source = rec.config;
    id_source["checkpoint"].erase("path");
    rec.id = run_id({{"command", rec.command}, {"config", id_source}});
    const auto dir = ctx.run_root / ("linear-eval-" + rec.id);

    if (ctx.force) fs::remove_all(dir);
    if (const auto prev = read_run_record(dir); prev && prev->status == "complete") {
        return {dir, *prev, true};
    }
    rec.started = utc_now();
    write_run_record(dir, rec);

    const auto encoder = ssl::evaluation_encoder(loaded.state);
    const auto images = train::load_images(manifest);
    const auto result = cfg.folds >= 2 ? train::linear_eval_kfold(*encoder, manifest, images, ecfg, cfg.folds)
                                       : train::linear_eval(*encoder, manifest, images, ecfg);

    json grid = json::array();
    for (const auto& c : result.grid.cells) grid.push_back({{"lr", c.lr}, {"weight_decay", c.wd}, {"score", c.score}});
    json report = {{"metrics", eval::to_json(result.report)},
                   {"folds", cfg.folds},
                   {"encoder_hash", hex64(result.hash_before)},
                   {"grid", grid}};
    if (!result.grid.cells.empty()) {
        report["selected"] = {{"lr", result.grid.best.lr}, {"weight_decay", result.grid.best.wd}};
    }
    write_file(dir / "report.json", report.dump(2) + "\n");

    auto rows = metric_rows(result.report);
    rows.insert(rows.begin(), {"Metric", "Value"});
    write_file(dir / "report.txt", eval::render_table(rows));

    rec.artifacts = {{"report", "report.json"}, {"table", "report.txt"}};
    rec.status = "complete";
    rec.finished = utc_now();
    write_run_record(dir, rec);
    return {dir, rec, false};
}

eval::MetricsReport read_metrics(const fs::path& run_dir) {
    try {
        return eval::report_from_json(json::parse(read_file(run_dir / "report.json")).at("metrics"));
    } catch (const json::exception& e) {
        throw ArtifactError("corrupt report in '" + run_dir.string() + "': " + e.what());
    }
}

void print_outcome(const Context& ctx, const RunOutcome& o) {
    ctx.out << (o.cached ? "cached " : "done ") << o.record.command << " " << o.record.id << " -> " << o.dir.string()
            << "\n";
}

// ---------------------------------------------------------------------------------------------
// Ablation

RunOutcome run_ablate(const ConfigDocument& doc, const ResolvedConfig& cfg, const Context& ctx, int& worst_exit) {
    RunRecord rec;
    rec.command = "ablate";
    json cells = json::array();
    for (const auto& f : cfg.ablate_frameworks) {
        for (const auto& b : cfg.ablate_backbones) cells.push_back({{"framework", f}, {"backbone", b}});
    }
    rec.config = {{"base", config_echo(cfg)}, {"cells", cells}};
    rec.id = run_id({{"command", rec.command}, {"config", rec.config}});
    const auto dir = ctx.run_root / ("ablate-" + rec.id);
    rec.started = utc_now();

    std::vector<std::vector<std::string>> rows{{"Network", "Framework", "Params (Million)", "ACC", "AUC", "F1-score"}};
    json results = json::array();
    for (const auto& cell : cells) {
        json entry = cell;
        std::vector<std::string> row{cell["backbone"].get<std::string>(), cell["framework"].get<std::string>(), "-",
                                     "-", "-", "-"};
        try {
            ConfigDocument cell_doc = doc;
            cell_doc.values["framework"] = cell["framework"];
            cell_doc.values["backbone"] = cell["backbone"];
            const auto cell_cfg = resolve_config(cell_doc);
            row[0] = network_name(cell_cfg.pretrain.backbone.kind);
            row[1] = framework_name(cell_cfg.pretrain.framework.kind);
            row[2] = format_params(backbone::count_params(cell_cfg.pretrain.backbone));
            const auto pre = run_pretrain(cell_cfg, ctx);
            print_outcome(ctx, pre);
            const auto ev = run_linear_eval(cell_doc, cell_cfg, pre.dir / "final.ckpt", std::nullopt, ctx);
            print_outcome(ctx, ev);
            const auto m = read_metrics(ev.dir);
            row[3] = eval::format_percent(m.accuracy);
            row[4] = eval::format_fraction(m.auc);
            row[5] = eval::format_fraction(m.f1);
            entry["pretrain_run"] = pre.record.id;
            entry["eval_run"] = ev.record.id;
            entry["metrics"] = eval::to_json(m);
            entry["status"] = "ok";
        } catch (...) {
            const auto error = std::current_exception();
            const int code = exit_code_for(error);
            if (code == 1) throw;
            worst_exit = std::max(worst_exit, code);
            entry["status"] = "failed";
            entry["error"] = {{"kind", error_kind(error)}, {"message", error_message(error)}};
            ctx.err << "warning: cell " << cell.dump() << " failed: " << error_message(error) << "\n";
        }
        entry["row"] = row;
        results.push_back(entry);
        rows.push_back(std::move(row));
    }
    const auto table = eval::render_table(rows);
    write_file(dir / "ablation.txt", table);
    write_file(dir / "ablation.json", json{{"cells", results}}.dump(2) + "\n");
    rec.artifacts = {{"table", "ablation.txt"}, {"cells", "ablation.json"}};
    rec.status = worst_exit == 0 ? "complete" : "partial";
    rec.finished = utc_now();
    write_run_record(dir, rec);
    ctx.out << table;
    return {dir, rec, false};
}

// ---------------------------------------------------------------------------------------------
// Report

std::vector<fs::path> expand_runs(const fs::path& dir) {
    if (!fs::exists(dir)) throw DataError("run directory '" + dir.string() + "' does not exist");
    if (fs::exists(dir / kRunFile)) return {dir};
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(dir)) {
        // Earlier reports are outputs of this command, not runs to report on.
        const bool is_report = e.path().filename().string().rfind("report-", 0) == 0;
        if (e.is_directory() && !is_report && fs::exists(e.path() / kRunFile)) runs.push_back(e.path());
    }
    std::sort(runs.begin(), runs.end());
    return runs;
}

RunOutcome run_report(const std::vector<fs::path>& inputs, const Context& ctx) {
    std::vector<fs::path> runs;
    for (const auto& d : inputs) {
        for (auto& r : expand_runs(d)) runs.push_back(fs::absolute(r).lexically_normal());
    }
    RunRecord rec;
    rec.command = "report";
    json sources = json::array();
    for (const auto& r : runs) sources.push_back({{"run", r.string()}, {"record", file_hash(r / kRunFile)}});
    rec.config = {{"runs", sources}};
    rec.id = run_id({{"command", rec.command}, {"config", rec.config}});
    const auto dir = ctx.run_root / ("report-" + rec.id);
    rec.started = utc_now();
    fs::create_directories(dir);

    if (runs.empty()) ctx.err << "warning: no runs found; writing an empty report\n";

    json notes = json::array();
    json curves = json::array();
    std::vector<std::string> names;
    std::vector<eval::MetricsReport> reports;
    for (const auto& run : runs) {
        const auto name = run.filename().string();
        bool found = false;
        if (fs::exists(run / "diagnostics.jsonl")) {
            std::ifstream in(run / "diagnostics.jsonl");
            std::ostringstream tsv;
            tsv << "step\tepoch\tloss\tteacher_entropy\n";
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto j = json::parse(line);
                tsv << j.at("step").get<std::int64_t>() << '\t' << j.at("epoch").get<int>() << '\t'
                    << std::setprecision(17) << j.at("loss").get<double>() << '\t';
                if (j.contains("teacher_entropy") && !j["teacher_entropy"].is_null()) {
                    tsv << j["teacher_entropy"].get<double>();
                }
                tsv << '\n';
            }
            const auto file = fs::path("curves") / (name + ".tsv");
            write_file(dir / file, tsv.str());
            curves.push_back({{"run", name}, {"file", file.string()}});
            found = true;
        }
        if (fs::exists(run / "report.json")) {
            names.push_back(name);
            reports.push_back(read_metrics(run));
            found = true;
        }
        if (!found) {
            notes.push_back({{"run", name}, {"note", "no diagnostics or metrics"}});
            ctx.err << "warning: run '" << name << "' has no diagnostics or metrics\n";
        }
    }

    std::string table;
    if (!reports.empty()) {
        std::vector<std::vector<std::string>> rows{{"Metric"}};
        for (const auto& n : names) rows[0].push_back(n);
        const auto labels = metric_rows(reports.front());
        for (std::size_t m = 0; m < labels.size(); ++m) {
            std::vector<std::string> row{labels[m][0]};
            for (const auto& r : reports) row.push_back(metric_rows(r)[m][1]);
            rows.push_back(std::move(row));
        }
        table = eval::render_table(rows);
    }
    write_file(dir / "metrics.txt", table);
    write_file(dir / "report.json", json{{"curves", curves}, {"metric_runs", names}, {"notes", notes}}.dump(2) + "\n");
    rec.artifacts = {{"metrics", "metrics.txt"}, {"report", "report.json"}, {"curves", "curves"}};
    rec.status = "complete";
    rec.finished = utc_now();
    write_run_record(dir, rec);
    ctx.out << table;
    return {dir, rec, false};
}

// ---------------------------------------------------------------------------------------------
// Command line

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string run_root;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config) {
    auto* c = cmd->add_option("--config", o.config, "config file");
    if (needs_config) c->required();
    cmd->add_option("--override", o.overrides, "key=value assignment applied after the config (repeatable)");
    cmd->add_option("--seed", o.seed, "seed for pretraining and evaluation");
    cmd->add_option("--run-root", o.run_root, std::string("run root (default $") + kRunRootEnv + " or ./runs)");
    cmd->add_flag("--force", o.force, "recompute runs that already exist");
}

ConfigDocument build_document(const CommonOptions& o) {
    ConfigDocument doc = o.config.empty() ? ConfigDocument{} : load_config(o.config);
    for (const auto& ov : o.overrides) apply_override(doc, ov);
    if (o.seed) {
        doc.values["seed"] = *o.seed;
        doc.values.erase("pretrain.seed");
        doc.values.erase("eval.seed");
    }
    return doc;
}

fs::path run_root_of(const CommonOptions& o) {
    if (!o.run_root.empty()) return fs::absolute(o.run_root).lexically_normal();
    if (const char* env = std::getenv(kRunRootEnv); env != nullptr && *env != '\0') {
        return fs::absolute(env).lexically_normal();
    }
    return fs::absolute("runs").lexically_normal();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-supervised pretraining and linear evaluation for chest radiographs", "cxrssl"};
    app.require_subcommand(1);
    CommonOptions common;
    std::string checkpoint;
    std::string manifest;
    std::optional<int> folds;
    std::vector<std::string> report_dirs;
    std::string toy_out;
    data::SyntheticConfig toy;
    std::vector<std::string> presets;

    auto* pretrain_cmd = app.add_subcommand("pretrain", "self-supervised pretraining");
    add_common(pretrain_cmd, common, true);

    auto* eval_cmd = app.add_subcommand("linear-eval", "linear probe on a frozen pretrained encoder");
    add_common(eval_cmd, common, false);
    eval_cmd->add_option("--checkpoint", checkpoint, "pretraining checkpoint")->required();
    eval_cmd->add_option("--manifest", manifest, "labeled manifest (default: data.eval_manifest, then data.manifest)");
    eval_cmd->add_option("--folds", folds, "k-fold cross-validation instead of the holdout split");

    auto* ablate_cmd = app.add_subcommand("ablate", "framework x backbone sweep of pretraining plus linear evaluation");
    add_common(ablate_cmd, common, true);
    ablate_cmd->add_option("--folds", folds, "k-fold cross-validation instead of the holdout split");

    auto* report_cmd = app.add_subcommand("report", "loss curves and side-by-side metric tables of finished runs");
    report_cmd->add_option("dirs", report_dirs, "run directories, or directories holding runs")->required();
    report_cmd->add_option("--run-root", common.run_root, "run root for the report output");
    report_cmd->add_flag("--force", common.force, "accepted for symmetry; reports are always rebuilt");

    auto* toy_cmd = app.add_subcommand("make-toy-data", "write the synthetic two-class dataset");
    toy_cmd->add_option("--out", toy_out, "output directory")->required();
    toy_cmd->add_option("--count", toy.count, "number of images");
    toy_cmd->add_option("--size", toy.size, "image side in pixels");
    toy_cmd->add_option("--seed", toy.seed, "generator seed");

    auto* params_cmd = app.add_subcommand("params", "parameter counts of backbone presets");
    params_cmd->add_option("presets", presets, "preset names (default: the full-size presets)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        }
        const Context ctx{run_root_of(common), common.force, out, err};

        if (toy_cmd->parsed()) {
            const auto path = data::write_synthetic_dataset(toy_out, toy);
            out << "wrote " << path.string() << "\n";
            return 0;
        }
        if (params_cmd->parsed()) {
            if (presets.empty()) presets = {"reference_vitaev2", "vit_small16", "resnet50"};
            std::vector<std::vector<std::string>> rows{{"Network", "Preset", "Params (Million)"}};
            for (const auto& p : presets) {
                const auto cfg = backbone::BackboneConfig::preset(p);
                rows.push_back({network_name(cfg.kind), p, format_params(backbone::count_params(cfg))});
            }
            out << eval::render_table(rows);
            return 0;
        }
        if (report_cmd->parsed()) {
            std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
            const auto o = run_report(dirs, ctx);
            print_outcome(ctx, o);
            return 0;
        }

        auto doc = build_document(common);
        if (folds) doc.values["folds"] = *folds;
        const auto cfg = resolve_config(doc);

        if (pretrain_cmd->parsed()) {
            const auto o = run_pretrain(cfg, ctx);
            out << json(o.record).dump(2) << "\n";
            print_outcome(ctx, o);
            return 0;
        }
        if (eval_cmd->parsed()) {
            std::optional<fs::path> m;
            if (!manifest.empty()) m = manifest;
            const auto o = run_linear_eval(doc, cfg, checkpoint, m, ctx);
            out << read_file(o.dir / "report.txt");
            print_outcome(ctx, o);
            return 0;
        }
        if (ablate_cmd->parsed()) {
            int worst = 0;
            const auto o = run_ablate(doc, cfg, ctx, worst);
            print_outcome(ctx, o);
            return worst;
        }
        return 2;
    } catch (...) {
        const auto error = std::current_exception();
        const int code = exit_code_for(error);
        err << json{{"error", {{"kind", error_kind(error)}, {"message", error_message(error)}, {"exit_code", code}}}}.dump()
            << "\n";
        return code;
    }
}

}  // namespace cxrssl::cli
