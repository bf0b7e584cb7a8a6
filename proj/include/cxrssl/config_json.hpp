#pragma once

#include <nlohmann/json.hpp>

#include "cxrssl/data.hpp"
#include "cxrssl/losses.hpp"
#include "cxrssl/optim.hpp"
#include "cxrssl/ssl.hpp"

// JSON mappings of the module configs. Readers reject unknown keys and keep defaults for
// missing ones.

namespace cxrssl::ssl {
void to_json(nlohmann::json& j, const DinoConfig& cfg);
void from_json(const nlohmann::json& j, DinoConfig& cfg);
void to_json(nlohmann::json& j, const ContrastiveConfig& cfg);
void from_json(const nlohmann::json& j, ContrastiveConfig& cfg);
void to_json(nlohmann::json& j, const FrameworkConfig& cfg);
void from_json(const nlohmann::json& j, FrameworkConfig& cfg);
}  // namespace cxrssl::ssl

namespace cxrssl::optim {
void to_json(nlohmann::json& j, const OptimizerConfig& cfg);
void from_json(const nlohmann::json& j, OptimizerConfig& cfg);
}  // namespace cxrssl::optim

namespace cxrssl::data {
void to_json(nlohmann::json& j, const PreprocessConfig& cfg);
void from_json(const nlohmann::json& j, PreprocessConfig& cfg);
}  // namespace cxrssl::data

namespace cxrssl {
/// Throws ConfigError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what);
}  // namespace cxrssl
