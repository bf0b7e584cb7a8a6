#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>
#include <torch/nn/module.h>
#include <torch/types.h>

namespace cxrssl::backbone {

/// Versioned on-disk container: parameter name -> flat numeric array, plus a metadata record.
///
/// Layout (all integers little-endian):
///
///     magic        8 bytes  "CXRSSLCK"
///     version      u32      kCheckpointFormatVersion
///     meta_len     u64      length of the metadata JSON text
///     meta         bytes    compact JSON with sorted keys
///     count        u64      number of tensors
///     per tensor (sorted by name):
///       name_len u32, name bytes, dtype u8 (1=f32, 2=f64, 3=i64), ndim u8, dims i64[ndim], data
///     checksum     u64      FNV-1a over every preceding byte
///
/// Since tensors are sorted and the metadata is canonical JSON, save -> load -> save is
/// byte-identical.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::map<std::string, torch::Tensor> tensors;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Throws ArtifactError on bad magic, unsupported version, truncation or checksum mismatch.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter and buffer of `module` into `out` as `prefix + name`.
void export_module(const torch::nn::Module& module, const std::string& prefix,
                   std::map<std::string, torch::Tensor>& out);

/// Loads parameters and buffers named `prefix + name`; missing entries and shape mismatches
/// throw ArtifactError.
void import_module(torch::nn::Module& module, const std::string& prefix,
                   const std::map<std::string, torch::Tensor>& tensors);

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

/// Hash of every parameter and buffer (names, shapes and raw data) of a module.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace cxrssl::backbone
