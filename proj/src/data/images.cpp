#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cxrssl/data.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/rng.hpp"

namespace cxrssl::data {

Image preprocess_eval(const Image& image, const PreprocessConfig& cfg) {
    if (cfg.crop < 1 || cfg.crop > cfg.resize) {
        throw ConfigError("preprocess: crop must lie in [1, resize]");
    }
    const Image resized = resize_bilinear(image, cfg.resize, cfg.resize);
    return convert_channels(center_crop(resized, cfg.crop, cfg.crop), cfg.channels);
}

Image load_image(const std::filesystem::path& path) {
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw DataError("cannot decode image '" + path.string() + "'");
    }
    double scale = 0.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        default: throw DataError("unsupported bit depth in '" + path.string() + "'");
    }
    const int src_channels = mat.channels();
    if (src_channels != 1 && src_channels != 3 && src_channels != 4) {
        throw DataError("unsupported channel count in '" + path.string() + "'");
    }
    const int channels = src_channels == 1 ? 1 : 3;
    Image out(channels, mat.rows, mat.cols);
    cv::Mat f;
    mat.convertTo(f, CV_64F, scale);
    for (int y = 0; y < mat.rows; ++y) {
        const double* row = f.ptr<double>(y);
        for (int x = 0; x < mat.cols; ++x) {
            if (channels == 1) {
                out.at(0, y, x) = static_cast<float>(row[x]);
            } else {
                // OpenCV stores BGR(A).
                for (int c = 0; c < 3; ++c) {
                    out.at(c, y, x) = static_cast<float>(row[x * src_channels + (2 - c)]);
                }
            }
        }
    }
    return out;
}

void write_png(const Image& image, const std::filesystem::path& path, bool sixteen_bit) {
    if (image.channels != 1 && image.channels != 3) {
        throw ShapeError("write_png expects 1 or 3 channels");
    }
    const double maxv = sixteen_bit ? 65535.0 : 255.0;
    cv::Mat mat(image.height, image.width, CV_MAKETYPE(sixteen_bit ? CV_16U : CV_8U, image.channels));
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                const int dst = image.channels == 1 ? 0 : 2 - c;
                const double v = std::lround(std::clamp(static_cast<double>(image.at(c, y, x)), 0.0, 1.0) * maxv);
                if (sixteen_bit) {
                    mat.ptr<std::uint16_t>(y)[x * image.channels + dst] = static_cast<std::uint16_t>(v);
                } else {
                    mat.ptr<std::uint8_t>(y)[x * image.channels + dst] = static_cast<std::uint8_t>(v);
                }
            }
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw DataError("cannot write image '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------------------------
// Synthetic radiograph-like images

Image synthetic_image(int label, std::uint64_t seed, int size) {
    Rng rng(seed);
    const double s = size;
    const double cx = s * (0.5 + uniform(rng, -0.06, 0.06));
    const double cy = s * (0.5 + uniform(rng, -0.06, 0.06));
    const double scale = uniform(rng, 0.85, 1.1);
    const double gain = uniform(rng, 0.7, 1.0);
    const double offset = uniform(rng, 0.0, 0.15);
    const double noise = uniform(rng, 0.01, 0.04);
    const double rib_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double rib_freq = uniform(rng, 0.9, 1.2) * 2.0 * std::numbers::pi / (s / 6.0);

    // Opacity class: scattered small nodules across both lung fields.
    struct Nodule {
        double x, y, r, amp;
    };
    std::vector<Nodule> nodules;
    if (label > 0) {
        const int count = static_cast<int>(uniform_int(rng, 6, 10));
        for (int i = 0; i < count; ++i) {
            const int lung = bernoulli(rng, 0.5) ? 1 : -1;
            const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const double rho = std::sqrt(uniform01(rng)) * 0.8;
            const double u = lung * 0.2 + 0.14 * rho * std::cos(a);
            const double v = -0.02 + 0.3 * rho * std::sin(a);
            nodules.push_back({cx + u * s * scale, cy + v * s * scale, s * uniform(rng, 0.035, 0.05), uniform(rng, 0.2, 0.3)});
        }
    }

    Image img(1, size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5 - cx) / (s * scale);
            const double v = (y + 0.5 - cy) / (s * scale);
            // Body: bright mediastinum and soft tissue; lungs: two dark ellipses.
            double val = 0.55 + 0.25 * std::exp(-(u * u) / 0.004);
            for (const int lung : {-1, 1}) {
                const double du = (u - lung * 0.2) / 0.14;
                const double dv = (v + 0.02) / 0.3;
                const double r2 = du * du + dv * dv;
                if (r2 < 1.0) {
                    const double edge = std::clamp((1.0 - r2) * 4.0, 0.0, 1.0);
                    val -= 0.35 * edge;
                    val += 0.06 * edge * std::sin(rib_freq * (y + 0.5) + rib_phase);
                }
            }
            for (const auto& n : nodules) {
                const double dx = x + 0.5 - n.x;
                const double dy = y + 0.5 - n.y;
                val += n.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * n.r * n.r));
            }
            val = offset + gain * val + noise * (2.0 * uniform01(rng) - 1.0);
            img.at(0, y, x) = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
    }
    return img;
}

namespace {

std::string synthetic_name(std::size_t i) {
    std::string digits = std::to_string(i);
    return "img_" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits + ".png";
}

int synthetic_label(const SyntheticConfig& cfg, std::size_t i) {
    return static_cast<int>(i % static_cast<std::size_t>(cfg.num_classes));
}

}  // namespace

DatasetManifest synthetic_manifest(const SyntheticConfig& cfg) {
    if (cfg.count < 1 || cfg.size < 8 || cfg.num_classes != 2) {
        throw ConfigError("synthetic set needs count >= 1, size >= 8 and exactly 2 classes");
    }
    DatasetManifest m;
    m.class_names = {"normal", "opacity"};
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.count); ++i) {
        m.records.push_back({synthetic_name(i), synthetic_label(cfg, i), Split::unsplit});
    }
    const double test = cfg.test_frac;
    const double val = cfg.val_frac;
    return split_holdout(m, 1.0 - test - val, val, cfg.seed);
}

std::vector<Image> synthetic_images(const SyntheticConfig& cfg) {
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(cfg.count));
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.count); ++i) {
        out.push_back(synthetic_image(synthetic_label(cfg, i), derive_seed(cfg.seed, 0x1a6e, i), cfg.size));
    }
    return out;
}

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticConfig& cfg) {
    auto manifest = synthetic_manifest(cfg);
    const auto images = synthetic_images(cfg);
    std::filesystem::create_directories(dir / "images");
    for (std::size_t i = 0; i < images.size(); ++i) {
        write_png(images[i], dir / "images" / manifest.records[i].path);
    }
    manifest.root = "images";
    const auto path = dir / "manifest.txt";
    write_manifest(manifest, path);
    return path;
}

}  // namespace cxrssl::data
