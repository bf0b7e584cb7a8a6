#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrssl/train.hpp"

namespace cxrssl::cli {

// ---------------------------------------------------------------------------------------------
// Config documents
//
// One `key = value` assignment per line; blank lines and lines starting with '#' are ignored.
// Values are JSON literals (numbers, true/false, arrays, quoted strings); anything that does
// not parse as JSON is taken as a bare string. `include = other.cfg` splices another file in
// place, relative to the including file. Later assignments win. The path keys
// `data.manifest` and `data.eval_manifest` are resolved against the declaring file.

struct ConfigDocument {
    std::map<std::string, nlohmann::json> values;
    std::vector<std::filesystem::path> sources;  ///< files read, in include order
};

/// JSON literal, or the trimmed text as a string when it is not valid JSON.
nlohmann::json parse_value(std::string_view text);

/// Parses document text into `doc`. `source` names the file for errors and anchors relative
/// includes and data paths. ParseError on malformed lines, ConfigError on include cycles.
void parse_config_text(ConfigDocument& doc, std::string_view text, const std::filesystem::path& source);

ConfigDocument load_config(const std::filesystem::path& path);

/// Applies a `key=value` override; relative data paths resolve against the working directory.
void apply_override(ConfigDocument& doc, std::string_view assignment);

/// Typed configuration assembled from a document.
///
/// Top-level keys: `scale` (toy|full), `framework`, `backbone` (preset name), `optimizer`
/// (kind), `seed`, `folds`, `data.manifest`, `data.eval_manifest`, `ablate.frameworks`,
/// `ablate.backbones`. Dotted keys set fields of the nested configs: `pretrain.*`,
/// `backbone.*`, `dino.*`, `contrastive.*`, `optimizer.*`, `augment.*`, `eval.*`
/// (e.g. `eval.preprocess.crop`). Unknown keys are a ConfigError.
struct ResolvedConfig {
    std::string scale = "toy";
    std::string backbone_preset;
    train::PretrainConfig pretrain;
    train::LinearEvalConfig eval;
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> eval_manifest;
    int folds = 0;
    std::vector<std::string> ablate_frameworks;
    std::vector<std::string> ablate_backbones;
};

ResolvedConfig resolve_config(const ConfigDocument& doc);

/// Evaluation settings for an encoder built from `backbone`: the scale preset for that
/// backbone, then the document's `eval.*` keys.
train::LinearEvalConfig resolve_eval_config(const ConfigDocument& doc, const backbone::BackboneConfig& backbone);

/// Canonical echo of a resolved configuration (the input of run ids).
nlohmann::json config_echo(const ResolvedConfig& cfg);

// ---------------------------------------------------------------------------------------------
// Runs

/// 16 hex digits of FNV-1a over the canonical (sorted-key, compact) JSON text.
std::string run_id(const nlohmann::json& canonical);

struct RunRecord {
    std::string id;
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::string started;   ///< UTC, ISO 8601
    std::string finished;  ///< empty while running
    std::string status = "running";
    /// Artifact name -> path relative to the run directory.
    std::map<std::string, std::string> artifacts;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// `run.json` inside a run directory.
std::optional<RunRecord> read_run_record(const std::filesystem::path& run_dir);
void write_run_record(const std::filesystem::path& run_dir, const RunRecord& record);

/// Display names used in result tables.
std::string network_name(backbone::BackboneKind kind);
std::string framework_name(ssl::FrameworkKind kind);
/// Millions with two decimals ("19.14"); three decimals below one million.
std::string format_params(std::int64_t count);

// ---------------------------------------------------------------------------------------------
// Entry point

/// Environment variable naming the default run root.
inline constexpr const char* kRunRootEnv = "CXRSSL_RUN_ROOT";

/// Exit codes: 0 success, 2 user/config/data error, 3 artifact error, 4 numeric failure,
/// 1 anything else.
int exit_code_for(std::exception_ptr error);

/// Runs the command line `args` (without the program name). Results go to `out`; warnings
/// and a one-line JSON error record go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cxrssl::cli
