#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cxrssl/image.hpp"

namespace cxrssl::data {

enum class Split { train, val, test, unsplit };

std::string to_string(Split split);
Split parse_split(std::string_view name);

struct Record {
    std::string path;          ///< relative to the manifest root
    std::optional<int> label;  ///< index into class_names
    Split split = Split::unsplit;

    friend bool operator==(const Record&, const Record&) = default;
};

/// Manifest text format (UTF-8, '\n' line endings, '#' starts a comment line):
///
///     cxrssl-manifest 1
///     classes <name> <name> ...          (zero or more class names, no whitespace inside)
///     root <directory>                   (optional; relative to the manifest's directory)
///     <path>\t<class name or ->\t<train|val|test|->
///
/// Label and split columns may be omitted. Paths are unique and contain no tabs.
struct DatasetManifest {
    std::vector<std::string> class_names;
    std::filesystem::path root;  ///< absolute after load_manifest
    std::vector<Record> records;

    std::filesystem::path resolve(const Record& r) const { return root / r.path; }
    std::vector<std::size_t> indices(Split split) const;
    int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
    bool labeled() const;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr std::string_view kManifestHeader = "cxrssl-manifest 1";

/// Parses manifest text. `base` resolves a relative root. Errors: ParseError (with line number)
/// for malformed lines and unknown class labels, DataError for duplicate paths.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base,
                               const std::string& source = "<memory>");
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Stratified train/val/test assignment. Split totals are the largest-remainder rounding
/// of N * (train_frac, val_frac, 1 - train_frac - val_frac); per-class counts stay within one
/// sample of the class's proportional share. Unlabeled records form their own stratum.
/// Throws DataError when a stratum has fewer records than non-empty splits.
DatasetManifest split_holdout(const DatasetManifest& manifest, double train_frac, double val_frac,
                              std::uint64_t seed);

/// Fractions of the nested protocol: `test_frac` held out first, then `val_frac_of_train`
/// of the remainder. (0.1, 0.1) -> train 0.81, val 0.09.
std::pair<double, double> nested_fractions(double test_frac, double val_frac_of_train);

struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of;  ///< record index -> fold

    std::vector<std::size_t> members(int fold) const;
    std::vector<std::size_t> complement(int fold) const;
    std::vector<std::size_t> sizes() const;
};

/// Stratified folds: records grouped by class (unlabeled last), shuffled within each group,
/// concatenated and dealt round-robin, so fold sizes differ by at most one and the first
/// N mod k folds hold the extra record.
FoldAssignment split_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed);

struct PreprocessConfig {
    int resize = 256;
    int crop = 224;
    int channels = 3;

    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

/// Exact resize to resize x resize, center crop x crop, channel conversion.
Image preprocess_eval(const Image& image, const PreprocessConfig& cfg);

/// Decodes PNG/JPEG/... via OpenCV. 8-bit and 16-bit data are scaled by 255 and 65535;
/// color images are returned as RGB and alpha is dropped. Throws DataError when undecodable.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit (or 16-bit) PNG of a 1- or 3-channel image with values in [0, 1].
void write_png(const Image& image, const std::filesystem::path& path, bool sixteen_bit = false);

/// Parameters of the synthetic two-class chest-radiograph-like set.
struct SyntheticConfig {
    int count = 200;
    int size = 32;
    int num_classes = 2;
    std::uint64_t seed = 7;
    double val_frac = 0.2;
    double test_frac = 0.2;

    friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

/// Single-channel image of class `label` drawn from the synthetic generator.
Image synthetic_image(int label, std::uint64_t seed, int size);

/// Writes `count` PNGs and a manifest (classes labeled, stratified splits) into `dir`.
/// Returns the manifest path.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticConfig& cfg);

/// Same images and manifest without touching the filesystem (root left empty).
DatasetManifest synthetic_manifest(const SyntheticConfig& cfg);
std::vector<Image> synthetic_images(const SyntheticConfig& cfg);

}  // namespace cxrssl::data
