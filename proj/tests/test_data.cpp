#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "cxrssl/data.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/image.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cxrssl;
using namespace cxrssl::data;

fs::path scratch(const std::string& name) {
    const auto dir = fs::path(CXRSSL_TEST_TMP) / "data" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetManifest labeled(int n, int classes, std::vector<int> weights = {}) {
    DatasetManifest m;
    for (int c = 0; c < classes; ++c) m.class_names.push_back("class" + std::to_string(c));
    if (weights.empty()) weights.assign(classes, 1);
    int total = 0;
    for (int w : weights) total += w;
    for (int i = 0; i < n; ++i) {
        int r = i % total;
        int label = 0;
        while (r >= weights[label]) r -= weights[label++];
        m.records.push_back({"img" + std::to_string(i) + ".png", label, Split::unsplit});
    }
    return m;
}

// ---------------------------------------------------------------------------------------------
// Manifests

TEST(Manifest, ParsesTheDocumentedFormat) {
    const std::string text =
        "cxrssl-manifest 1\n"
        "# three chest films\n"
        "classes normal pneumonia\n"
        "root images\n"
        "a.png\tnormal\ttrain\n"
        "b.png\tpneumonia\ttest\n"
        "c.png\n";
    const auto m = parse_manifest(text, "/data");
    EXPECT_EQ(m.records.size(), 3u);
    EXPECT_EQ(m.num_classes(), 2);
    EXPECT_EQ(m.root, fs::path("/data/images"));
    EXPECT_EQ(m.records[1].label, 1);
    EXPECT_EQ(m.records[1].split, Split::test);
    EXPECT_FALSE(m.records[2].label.has_value());
    EXPECT_EQ(m.records[2].split, Split::unsplit);
    EXPECT_EQ(m.resolve(m.records[0]), fs::path("/data/images/a.png"));
    EXPECT_FALSE(m.labeled());
}

TEST(Manifest, UnknownLabelNamesTheLine) {
    const std::string text = "cxrssl-manifest 1\nclasses normal pneumonia\na.png\tnormal\nb.png\ttuberculosis\n";
    try {
        parse_manifest(text, "/", "list.txt");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
        EXPECT_NE(std::string(e.what()).find("list.txt:4"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("tuberculosis"), std::string::npos) << e.what();
    }
}

TEST(Manifest, MalformedInputIsRejected) {
    EXPECT_THROW(parse_manifest("not-a-manifest\n", "/"), ParseError);
    EXPECT_THROW(parse_manifest("cxrssl-manifest 2\n", "/"), ParseError);
    EXPECT_THROW(parse_manifest("cxrssl-manifest 1\na.png\t-\tsideways\n", "/"), ParseError);
    EXPECT_THROW(parse_manifest("cxrssl-manifest 1\na.png\t-\ttrain\textra\n", "/"), ParseError);
    EXPECT_THROW(parse_manifest("cxrssl-manifest 1\na.png\nb.png\na.png\n", "/"), DataError);
}

TEST(Manifest, WriteLoadRoundTrip) {
    auto m = labeled(25, 3);
    m.records[4].label.reset();
    m.records[7].split = Split::val;
    const auto dir = scratch("roundtrip");
    m.root = dir;
    write_manifest(m, dir / "manifest.txt");
    const auto loaded = load_manifest(dir / "manifest.txt");
    EXPECT_EQ(loaded, m);
    EXPECT_EQ(format_manifest(loaded), format_manifest(m));
    EXPECT_THROW(load_manifest(dir / "absent.txt"), DataError);
}

// ---------------------------------------------------------------------------------------------
// Holdout splits

TEST(Holdout, NestedFractions) {
    const auto [train, val] = nested_fractions(0.1, 0.1);
    EXPECT_NEAR(train, 0.81, 1e-15);
    EXPECT_NEAR(val, 0.09, 1e-15);
}

TEST(Holdout, EightHundredFiftyTwoRecords) {
    const auto m = labeled(852, 2);
    const auto [train, val] = nested_fractions(0.1, 0.1);
    const auto s = split_holdout(m, train, val, 3);
    EXPECT_EQ(s.indices(Split::train).size(), 690u);
    EXPECT_EQ(s.indices(Split::val).size(), 77u);
    EXPECT_EQ(s.indices(Split::test).size(), 85u);
}

TEST(Holdout, DeterministicStratifiedPartition) {
    for (const auto& weights : std::vector<std::vector<int>>{{1, 1}, {3, 1}, {5, 2, 1}}) {
        const auto m = labeled(301, static_cast<int>(weights.size()), weights);
        const auto a = split_holdout(m, 0.7, 0.15, 9);
        const auto b = split_holdout(m, 0.7, 0.15, 9);
        EXPECT_EQ(a, b);
        EXPECT_NE(a, split_holdout(m, 0.7, 0.15, 10));
        std::size_t total = 0;
        for (const auto split : {Split::train, Split::val, Split::test}) {
            const auto idx = a.indices(split);
            total += idx.size();
            for (int c = 0; c < m.num_classes(); ++c) {
                std::size_t in_class = 0;
                std::size_t global = 0;
                for (const auto i : idx) in_class += a.records[i].label == c ? 1 : 0;
                for (const auto& r : m.records) global += r.label == c ? 1 : 0;
                const double expected = static_cast<double>(global) * idx.size() / m.records.size();
                EXPECT_LE(std::abs(static_cast<double>(in_class) - expected), 1.0 + 1e-9)
                    << "class " << c << " split " << to_string(split);
            }
        }
        EXPECT_EQ(total, m.records.size());
        EXPECT_TRUE(a.indices(Split::unsplit).empty());
    }
}

TEST(Holdout, RejectsImpossibleRequests) {
    EXPECT_THROW(split_holdout(labeled(10, 2), 0.8, 0.3, 1), ConfigError);
    EXPECT_THROW(split_holdout(labeled(10, 2), 0.0, 0.3, 1), ConfigError);
    // One record of class 1 cannot populate three splits.
    auto m = labeled(10, 2, {9, 1});
    EXPECT_THROW(split_holdout(m, 0.6, 0.2, 1), DataError);
}

// ---------------------------------------------------------------------------------------------
// Folds

TEST(Kfold, TenRecordsFiveFolds) {
    const auto f = split_kfold(labeled(10, 2), 5, 1);
    EXPECT_EQ(f.sizes(), (std::vector<std::size_t>{2, 2, 2, 2, 2}));
}

TEST(Kfold, EightHundredFiftyTwoRecords) {
    const auto m = labeled(852, 2);
    const auto f = split_kfold(m, 5, 4);
    EXPECT_EQ(f.sizes(), (std::vector<std::size_t>{171, 171, 170, 170, 170}));
    std::set<std::size_t> seen;
    for (int k = 0; k < 5; ++k) {
        const auto members = f.members(k);
        const auto rest = f.complement(k);
        EXPECT_EQ(members.size() + rest.size(), 852u);
        for (const auto i : members) EXPECT_TRUE(seen.insert(i).second) << "record " << i << " in two folds";
        std::size_t positives = 0;
        for (const auto i : members) positives += m.records[i].label == 1 ? 1 : 0;
        EXPECT_LE(std::abs(static_cast<double>(positives) - members.size() / 2.0), 1.0);
    }
    EXPECT_EQ(seen.size(), 852u);
}

TEST(Kfold, DeterministicAndValidated) {
    const auto m = labeled(40, 3);
    EXPECT_EQ(split_kfold(m, 4, 2).fold_of, split_kfold(m, 4, 2).fold_of);
    EXPECT_NE(split_kfold(m, 4, 2).fold_of, split_kfold(m, 4, 3).fold_of);
    EXPECT_THROW(split_kfold(m, 1, 0), ConfigError);
    EXPECT_THROW(split_kfold(labeled(3, 1), 5, 0), DataError);
}

// ---------------------------------------------------------------------------------------------
// Images and preprocessing

Image gradient(int c, int h, int w) {
    Image img(c, h, w);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) img.at(ch, y, x) = static_cast<float>((x + 2 * y + 3 * ch) % 256) / 255.0f;
        }
    }
    return img;
}

TEST(Preprocess, FullSizes) {
    const auto out = preprocess_eval(gradient(1, 512, 512), PreprocessConfig{});
    EXPECT_EQ(out.channels, 3);
    EXPECT_EQ(out.height, 224);
    EXPECT_EQ(out.width, 224);
    const auto again = preprocess_eval(gradient(1, 224, 224), PreprocessConfig{});
    EXPECT_EQ(again.height, 224);
    const auto expected = center_crop(resize_bilinear(convert_channels(gradient(1, 224, 224), 3), 256, 256), 224, 224);
    EXPECT_EQ(again, expected);
}

TEST(Preprocess, WhiteStaysWhiteAndRangeHolds) {
    const auto out = preprocess_eval(Image(1, 300, 180, 1.0f), PreprocessConfig{});
    for (const float v : out.pixels) EXPECT_EQ(v, 1.0f);
    const auto g = preprocess_eval(gradient(3, 97, 311), PreprocessConfig{256, 224, 1});
    EXPECT_EQ(g.channels, 1);
    for (const float v : g.pixels) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(Image, ResizeToSameSizeIsIdentity) {
    const auto img = gradient(2, 13, 17);
    EXPECT_EQ(resize_bilinear(img, 13, 17), img);
}

TEST(Image, CropBoundsAndChannelRules) {
    const auto img = gradient(3, 10, 10);
    EXPECT_THROW(crop(img, 5, 5, 6, 2), ShapeError);
    EXPECT_THROW(convert_channels(Image(2, 4, 4), 3), ShapeError);
    const auto gray = convert_channels(img, 1);
    EXPECT_NEAR(gray.at(0, 3, 4), kLumaR * img.at(0, 3, 4) + kLumaG * img.at(1, 3, 4) + kLumaB * img.at(2, 3, 4), 1e-6);
}

TEST(Png, EightAndSixteenBitRoundTrips) {
    const auto dir = scratch("png");
    const auto img = gradient(1, 20, 30);
    write_png(img, dir / "g8.png");
    const auto back8 = load_image(dir / "g8.png");
    ASSERT_EQ(back8.height, 20);
    ASSERT_EQ(back8.width, 30);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back8.pixels[i], img.pixels[i], 0.5 / 255.0 + 1e-6);

    Image fine(1, 8, 8);
    for (std::size_t i = 0; i < fine.pixels.size(); ++i) fine.pixels[i] = static_cast<float>(i * 1000 + 7) / 65535.0f;
    write_png(fine, dir / "g16.png", true);
    const auto back16 = load_image(dir / "g16.png");
    for (std::size_t i = 0; i < fine.pixels.size(); ++i) EXPECT_NEAR(back16.pixels[i], fine.pixels[i], 0.5 / 65535.0 + 1e-7);

    const auto rgb = gradient(3, 6, 5);
    write_png(rgb, dir / "rgb.png");
    const auto back_rgb = load_image(dir / "rgb.png");
    ASSERT_EQ(back_rgb.channels, 3);
    // Channel order survives (RGB in, RGB out).
    for (std::size_t i = 0; i < rgb.pixels.size(); ++i) EXPECT_NEAR(back_rgb.pixels[i], rgb.pixels[i], 0.5 / 255.0 + 1e-6);
}

TEST(Png, UndecodableFilesAreDataErrors) {
    const auto dir = scratch("bad");
    std::ofstream(dir / "junk.png") << "definitely not a png";
    EXPECT_THROW(load_image(dir / "junk.png"), DataError);
    EXPECT_THROW(load_image(dir / "missing.png"), DataError);
}

// ---------------------------------------------------------------------------------------------
// Synthetic set

TEST(Synthetic, DeterministicAndLabeled) {
    SyntheticConfig cfg;
    cfg.count = 40;
    const auto a = synthetic_images(cfg);
    const auto b = synthetic_images(cfg);
    EXPECT_EQ(a, b);
    const auto m = synthetic_manifest(cfg);
    EXPECT_EQ(m.records.size(), 40u);
    EXPECT_EQ(m.num_classes(), 2);
    EXPECT_TRUE(m.labeled());
    EXPECT_FALSE(m.indices(Split::test).empty());
    cfg.seed += 1;
    EXPECT_NE(synthetic_images(cfg), a);
    for (const auto& img : a) {
        EXPECT_EQ(img.channels, 1);
        EXPECT_EQ(img.height, 32);
    }
}

TEST(Synthetic, OnDiskCopyMatchesInMemory) {
    SyntheticConfig cfg;
    cfg.count = 12;
    const auto dir = scratch("synthetic");
    const auto path = write_synthetic_dataset(dir, cfg);
    const auto m = load_manifest(path);
    const auto mem = synthetic_manifest(cfg);
    EXPECT_EQ(m.records, mem.records);
    const auto images = synthetic_images(cfg);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto img = load_image(m.resolve(m.records[i]));
        for (std::size_t p = 0; p < img.pixels.size(); ++p) {
            ASSERT_NEAR(img.pixels[p], images[i].pixels[p], 0.5 / 255.0 + 1e-6);
        }
    }
}

}  // namespace
