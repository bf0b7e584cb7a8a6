#include <algorithm>
#include <fstream>
#include <sstream>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/cli.hpp"
#include "cxrssl/config_json.hpp"
#include "cxrssl/errors.hpp"

namespace cxrssl::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kMaxIncludeDepth = 16;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    });
}

bool is_path_key(std::string_view key) {
    return key == "data.manifest" || key == "data.eval_manifest";
}

json anchored(const std::string& key, json value, const fs::path& base) {
    if (!is_path_key(key)) return value;
    if (!value.is_string()) throw ConfigError("'" + key + "' must be a path");
    fs::path p = value.get<std::string>();
    if (p.is_relative()) p = base / p;
    return fs::absolute(p).lexically_normal().string();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void parse_into(ConfigDocument& doc, std::string_view text, const fs::path& source, std::vector<fs::path>& stack) {
    if (static_cast<int>(stack.size()) > kMaxIncludeDepth) {
        throw ConfigError("config includes nest deeper than " + std::to_string(kMaxIncludeDepth));
    }
    const auto base = fs::absolute(source).parent_path();
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(source.string(), line_no, "expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const auto raw = trim(line.substr(eq + 1));
        if (!valid_key(key)) throw ParseError(source.string(), line_no, "invalid key '" + key + "'");
        if (raw.empty()) throw ParseError(source.string(), line_no, "missing value for '" + key + "'");
        const json value = parse_value(raw);
        if (key == "include") {
            if (!value.is_string()) throw ParseError(source.string(), line_no, "include needs a path");
            fs::path inc = value.get<std::string>();
            if (inc.is_relative()) inc = base / inc;
            inc = fs::weakly_canonical(inc);
            if (std::find(stack.begin(), stack.end(), inc) != stack.end()) {
                throw ConfigError("config include cycle through '" + inc.string() + "'");
            }
            stack.push_back(inc);
            doc.sources.push_back(inc);
            parse_into(doc, read_text(inc), inc, stack);
            stack.pop_back();
            continue;
        }
        try {
            doc.values[key] = anchored(key, value, base);
        } catch (const ConfigError& e) {
            throw ParseError(source.string(), line_no, e.what());
        }
    }
}

// Keys that are not paths into the nested configs.
const std::vector<std::string>& plain_keys() {
    static const std::vector<std::string> keys{"scale",         "framework", "backbone",          "optimizer",
                                               "seed",          "folds",     "data.manifest",     "data.eval_manifest",
                                               "ablate.frameworks", "ablate.backbones"};
    return keys;
}

bool is_plain_key(const std::string& key) {
    const auto& keys = plain_keys();
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::vector<std::string> split_dots(const std::string& key) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        parts.push_back(key.substr(pos, dot - pos));
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return parts;
}

void assign_path(json& root, const std::vector<std::string>& parts, std::size_t from, const json& value,
                 const std::string& key) {
    json* node = &root;
    for (std::size_t i = from; i < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i])) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        node = &(*node)[parts[i]];
    }
    if (node->is_object()) {
        throw ConfigError("config key '" + key + "' names a section; set its fields instead");
    }
    *node = value;
}

template <typename T>
T get_as(const ConfigDocument& doc, const std::string& key, T fallback) {
    const auto it = doc.values.find(key);
    if (it == doc.values.end()) return fallback;
    try {
        return it->second.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type: " + it->second.dump());
    }
}

template <typename T>
T decode(const json& j, const char* what) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid ") + what + " setting: " + e.what());
    }
}

std::string scale_of(const ConfigDocument& doc) {
    const auto scale = get_as<std::string>(doc, "scale", "toy");
    if (scale != "toy" && scale != "full") throw ConfigError("scale must be toy or full, got '" + scale + "'");
    return scale;
}

// Applies every key whose first component is `prefix` (or the whole-section alias) to `target`.
void apply_section(const ConfigDocument& doc, const std::string& prefix, json& target, std::size_t skip) {
    for (const auto& [key, value] : doc.values) {
        if (is_plain_key(key)) continue;
        const auto parts = split_dots(key);
        if (parts.size() < 2 || parts[0] != prefix) continue;
        assign_path(target, parts, skip, value, key);
    }
}

}  // namespace

json parse_value(std::string_view text) {
    const auto t = trim(text);
    json j = json::parse(t.begin(), t.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) return std::string(t);
    return j;
}

void parse_config_text(ConfigDocument& doc, std::string_view text, const fs::path& source) {
    std::vector<fs::path> stack{fs::weakly_canonical(fs::absolute(source))};
    parse_into(doc, text, source, stack);
}

ConfigDocument load_config(const fs::path& path) {
    ConfigDocument doc;
    const auto canonical = fs::weakly_canonical(fs::absolute(path));
    doc.sources.push_back(canonical);
    parse_config_text(doc, read_text(path), canonical);
    return doc;
}

void apply_override(ConfigDocument& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const std::string key(trim(assignment.substr(0, eq)));
    const auto raw = trim(assignment.substr(eq + 1));
    if (!valid_key(key) || key == "include") throw ConfigError("invalid override key '" + key + "'");
    if (raw.empty()) throw ConfigError("override '" + key + "' has no value");
    doc.values[key] = anchored(key, parse_value(raw), fs::current_path());
}

train::LinearEvalConfig resolve_eval_config(const ConfigDocument& doc, const backbone::BackboneConfig& backbone) {
    auto cfg = scale_of(doc) == "full" ? train::full_linear_eval_preset(backbone.kind)
                                        : train::toy_linear_eval_preset(backbone);
    if (doc.values.count("seed")) cfg.seed = get_as<std::uint64_t>(doc, "seed", 0);
    json j = cfg;
    apply_section(doc, "eval", j, 1);
    cfg = decode<train::LinearEvalConfig>(j, "eval");
    train::validate(cfg);
    return cfg;
}

ResolvedConfig resolve_config(const ConfigDocument& doc) {
    for (const auto& [key, value] : doc.values) {
        if (is_plain_key(key)) continue;
        static const std::vector<std::string> sections{"pretrain", "backbone", "dino",    "contrastive",
                                                       "optimizer", "augment", "eval"};
        const auto parts = split_dots(key);
        if (parts.size() < 2 || std::find(sections.begin(), sections.end(), parts[0]) == sections.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    ResolvedConfig out;
    out.scale = scale_of(doc);
    const auto framework = ssl::parse_framework_kind(get_as<std::string>(doc, "framework", "adapted_dino"));
    out.backbone_preset = get_as<std::string>(doc, "backbone", out.scale == "full" ? "reference_vitaev2" : "tiny_vitaev2");
    const auto backbone = backbone::BackboneConfig::preset(out.backbone_preset);
    out.pretrain = out.scale == "full" ? train::full_pretrain_preset(framework, backbone.kind)
                                        : train::toy_pretrain_preset(framework, backbone.kind);
    out.pretrain.backbone = backbone;
    if (doc.values.count("seed")) out.pretrain.seed = get_as<std::uint64_t>(doc, "seed", 0);
    if (doc.values.count("optimizer")) {
        out.pretrain.optimizer.kind = optim::parse_optimizer_kind(get_as<std::string>(doc, "optimizer", ""));
    }

    json pj = out.pretrain;
    apply_section(doc, "pretrain", pj, 1);
    apply_section(doc, "backbone", pj["backbone"], 1);
    apply_section(doc, "dino", pj["framework"]["dino"], 1);
    apply_section(doc, "contrastive", pj["framework"]["contrastive"], 1);
    apply_section(doc, "optimizer", pj["optimizer"], 1);
    apply_section(doc, "augment", pj["augment"], 1);
    if (!doc.values.count("augment.out_size") && !doc.values.count("pretrain.augment.out_size")) {
        pj["augment"]["out_size"] = pj["backbone"]["image_size"];
    }
    out.pretrain = decode<train::PretrainConfig>(pj, "pretrain");
    train::validate(out.pretrain);

    out.eval = resolve_eval_config(doc, out.pretrain.backbone);
    if (doc.values.count("data.manifest")) out.manifest = get_as<std::string>(doc, "data.manifest", "");
    if (doc.values.count("data.eval_manifest")) out.eval_manifest = get_as<std::string>(doc, "data.eval_manifest", "");
    out.folds = get_as<int>(doc, "folds", 0);
    if (out.folds < 0 || out.folds == 1) throw ConfigError("folds must be 0 (holdout) or >= 2");
    out.ablate_frameworks = get_as<std::vector<std::string>>(doc, "ablate.frameworks",
                                                             {"adapted_dino", "simclr", "byol", "simsiam"});
    const std::vector<std::string> default_backbones =
        out.scale == "full" ? std::vector<std::string>{"reference_vitaev2", "resnet50", "vit_small16"}
                             : std::vector<std::string>{"tiny_vitaev2", "tiny_resnet", "tiny_vit"};
    out.ablate_backbones = get_as<std::vector<std::string>>(doc, "ablate.backbones", default_backbones);
    return out;
}

json config_echo(const ResolvedConfig& cfg) {
    json j = {{"scale", cfg.scale},
              {"backbone_preset", cfg.backbone_preset},
              {"pretrain", cfg.pretrain},
              {"eval", cfg.eval},
              {"folds", cfg.folds}};
    j["data"] = json::object();
    if (cfg.manifest) j["data"]["manifest"] = cfg.manifest->string();
    if (cfg.eval_manifest) j["data"]["eval_manifest"] = cfg.eval_manifest->string();
    return j;
}

std::string run_id(const json& canonical) {
    static const char* digits = "0123456789abcdef";
    auto h = backbone::fnv1a64(canonical.dump());
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace cxrssl::cli
