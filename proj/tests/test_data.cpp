#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>

#include "bvae/data/batches.hpp"
#include "bvae/data/idx.hpp"
#include "bvae/data/rotation.hpp"
#include "bvae/data/targets.hpp"
#include "support/temp_dir.hpp"

namespace bvae::data {
namespace {

using oracle::TempDir;

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_gzip(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    gzFile f = gzopen(p.c_str(), "wb");
    ASSERT_NE(f, nullptr);
    gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
}

// Two 28x28 images: pixel i of image k holds byte (7*i + 3*k) mod 256.
std::vector<unsigned char> fixture_images() {
    std::vector<unsigned char> b = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28};
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 784; ++i) b.push_back(static_cast<unsigned char>((7 * i + 3 * k) % 256));
    }
    return b;
}

std::vector<unsigned char> fixture_labels() { return {0, 0, 8, 1, 0, 0, 0, 2, 7, 3}; }

LabeledDataset small_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    LabeledDataset ds;
    ds.images = Tensor({n, 28, 28, 1});
    for (float& v : ds.images.values()) v = u(rng);
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<std::uint8_t>(i % 10));
    return ds;
}

std::vector<float> random_image(std::uint64_t seed) { return small_dataset(1, seed).images.storage(); }

TEST(Idx, FixtureBytesNormalizeExactly) {
    TempDir dir;
    write_bytes(dir / "img", fixture_images());
    write_bytes(dir / "lbl", fixture_labels());
    const LabeledDataset ds = load_idx(dir / "img", dir / "lbl");
    ASSERT_EQ(ds.images.shape(), (Shape{2, 28, 28, 1}));
    EXPECT_EQ(ds.labels, (std::vector<std::uint8_t>{7, 3}));
    for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 784; ++i) {
            const float expected = static_cast<float>((7 * i + 3 * k) % 256) / 255.0f;
            ASSERT_EQ(ds.images[static_cast<std::size_t>(k * 784 + i)], expected);
        }
    }
}

TEST(Idx, GzipIsDetectedTransparently) {
    TempDir dir;
    write_gzip(dir / "img.gz", fixture_images());
    write_gzip(dir / "lbl.gz", fixture_labels());
    write_bytes(dir / "img", fixture_images());
    write_bytes(dir / "lbl", fixture_labels());
    EXPECT_EQ(load_idx(dir / "img.gz", dir / "lbl.gz").images, load_idx(dir / "img", dir / "lbl").images);
}

TEST(Idx, LabelsFilePresentedAsImagesIsFormatError) {
    TempDir dir;
    write_bytes(dir / "lbl", fixture_labels());
    EXPECT_THROW(load_idx(dir / "lbl", dir / "lbl"), FormatError);
}

TEST(Idx, CountMismatchIsConsistencyError) {
    TempDir dir;
    write_bytes(dir / "img", fixture_images());
    write_bytes(dir / "lbl", {0, 0, 8, 1, 0, 0, 0, 3, 1, 2, 3});
    EXPECT_THROW(load_idx(dir / "img", dir / "lbl"), ConsistencyError);
}

TEST(Idx, TruncatedFileIsIoError) {
    TempDir dir;
    auto bytes = fixture_images();
    bytes.resize(bytes.size() - 10);
    write_bytes(dir / "img", bytes);
    write_bytes(dir / "lbl", fixture_labels());
    EXPECT_THROW(load_idx(dir / "img", dir / "lbl"), IoError);
    write_bytes(dir / "short", {0, 0, 8});
    EXPECT_THROW(load_idx(dir / "short", dir / "lbl"), IoError);
}

TEST(Idx, LabelOutOfRangeIsValidationError) {
    TempDir dir;
    write_bytes(dir / "img", fixture_images());
    write_bytes(dir / "lbl", {0, 0, 8, 1, 0, 0, 0, 2, 7, 10});
    EXPECT_THROW(load_idx(dir / "img", dir / "lbl"), ValidationError);
}

TEST(Idx, SaveLoadRoundTripIsIdentity) {
    TempDir dir;
    write_bytes(dir / "img", fixture_images());
    write_bytes(dir / "lbl", fixture_labels());
    const LabeledDataset a = load_idx(dir / "img", dir / "lbl");
    save_idx(a, dir / "img2", dir / "lbl2");
    const LabeledDataset b = load_idx(dir / "img2", dir / "lbl2");
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.labels, b.labels);
    std::ifstream f1(dir / "img", std::ios::binary), f2(dir / "img2", std::ios::binary);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
}

TEST(Idx, MissingMnistNamesExpectedFiles) {
    TempDir dir;
    try {
        locate_mnist(dir.path(), Split::train);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("train-images-idx3-ubyte"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("train-labels-idx1-ubyte"), std::string::npos);
    }
}

TEST(Cache, RoundTripIsIdentity) {
    TempDir dir;
    LabeledDataset a = small_dataset(13, 5);
    a.kind = "mnist_rotated";
    a.seed = 42;
    a.split = Split::test;
    save_dataset_cache(a, dir / "cache");
    const LabeledDataset b = load_dataset_cache(dir / "cache");
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(b.kind, "mnist_rotated");
    EXPECT_EQ(b.seed, 42u);
    EXPECT_EQ(b.split, Split::test);
}

TEST(Cache, TruncatedPayloadIsIoError) {
    TempDir dir;
    save_dataset_cache(small_dataset(3, 1), dir / "cache");
    std::filesystem::resize_file(dir / "cache.f32", 100);
    EXPECT_THROW(load_dataset_cache(dir / "cache"), IoError);
}

TEST(Rotation, ZeroAngleIsBitwiseIdentity) {
    const auto img = random_image(1);
    EXPECT_EQ(rotate_image(img, 0.0), img);
}

TEST(Rotation, HalfTurnEqualsDoubleFlip) {
    const auto img = random_image(2);
    const auto out = rotate_image(img, std::numbers::pi);
    for (std::size_t r = 0; r < 28; ++r) {
        for (std::size_t c = 0; c < 28; ++c) {
            ASSERT_EQ(out[r * 28 + c], img[(27 - r) * 28 + (27 - c)]) << r << "," << c;
        }
    }
}

TEST(Rotation, QuarterTurnsArePermutations) {
    const auto img = random_image(3);
    for (int q = 1; q <= 3; ++q) {
        auto out = rotate_image(img, q * std::numbers::pi / 2);
        auto a = img;
        std::ranges::sort(a);
        std::ranges::sort(out);
        EXPECT_EQ(a, out) << q;
    }
    // Four quarter turns compose to the identity.
    auto x = img;
    for (int q = 0; q < 4; ++q) x = rotate_image(x, std::numbers::pi / 2);
    EXPECT_EQ(x, img);
}

TEST(Rotation, ConstantImageInteriorUnchanged) {
    const std::vector<float> img(784, 0.6f);
    for (double angle : {0.3, 1.0, 2.5, 4.0}) {
        const auto out = rotate_image(img, angle);
        for (std::size_t r = 0; r < 28; ++r) {
            for (std::size_t c = 0; c < 28; ++c) {
                const double dr = static_cast<double>(r) - 13.5, dc = static_cast<double>(c) - 13.5;
                if (dr * dr + dc * dc < 12.0 * 12.0) {
                    ASSERT_NEAR(out[r * 28 + c], 0.6f, 1e-6);
                }
            }
        }
    }
}

TEST(Rotation, OutputInUnitInterval) {
    const auto img = random_image(4);
    for (double angle = 0.0; angle < 6.3; angle += 0.37) {
        for (float v : rotate_image(img, angle)) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
}

TEST(Rotation, RoundTripOnSmoothImageWithinBlurBound) {
    std::vector<float> img(784);
    for (std::size_t r = 0; r < 28; ++r) {
        for (std::size_t c = 0; c < 28; ++c) {
            const double dr = static_cast<double>(r) - 12.0, dc = static_cast<double>(c) - 15.0;
            img[r * 28 + c] = static_cast<float>(std::exp(-(dr * dr + dc * dc) / (2 * 5.0 * 5.0)));
        }
    }
    for (double angle : {0.1, 0.7, 1.9, 3.3, 5.0}) {
        const auto back = rotate_image(rotate_image(img, -angle), angle);
        for (std::size_t r = 0; r < 28; ++r) {
            for (std::size_t c = 0; c < 28; ++c) {
                // Pixels near the border lose mass to zero padding on the way out.
                if (std::hypot(static_cast<double>(r) - 13.5, static_cast<double>(c) - 13.5) > 10.0) continue;
                ASSERT_NEAR(back[r * 28 + c], img[r * 28 + c], 0.02) << angle << " " << r << "," << c;
            }
        }
    }
}

TEST(RotatedDataset, DeterministicPerSeed) {
    const LabeledDataset ds = small_dataset(20, 7);
    const LabeledDataset a = make_rotated_dataset(ds, 11);
    const LabeledDataset b = make_rotated_dataset(ds, 11);
    const LabeledDataset c = make_rotated_dataset(ds, 12);
    EXPECT_EQ(a.images, b.images);
    EXPECT_NE(a.images, c.images);
    EXPECT_EQ(a.labels, ds.labels);
    EXPECT_EQ(c.labels, ds.labels);
}

TEST(RotatedDataset, AnglesUniformChiSquare) {
    const auto angles = rotation_angles(60000, 2024, Split::train);
    std::array<double, 36> counts{};
    for (double a : angles) {
        ASSERT_GE(a, 0.0);
        ASSERT_LT(a, 2 * std::numbers::pi);
        counts[static_cast<std::size_t>(a / (2 * std::numbers::pi) * 36)] += 1;
    }
    const double expected = 60000.0 / 36;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Upper 0.001 quantile of chi-square with 35 degrees of freedom.
    EXPECT_LT(chi2, 66.62);
}

TEST(Targets, ExemplarIsFirstOccurrencePerClass) {
    LabeledDataset ds = small_dataset(30, 9);
    std::ranges::reverse(ds.labels);
    const TargetSet t = make_target_set(TargetKind::exemplar, ds, 0);
    for (std::size_t d = 0; d < 10; ++d) {
        const std::size_t idx = t.source_index[d];
        EXPECT_EQ(ds.labels[idx], d);
        for (std::size_t j = 0; j < idx; ++j) EXPECT_NE(ds.labels[j], d);
        EXPECT_TRUE(std::ranges::equal(t.targets.row(d), ds.image(idx)));
    }
}

TEST(Targets, GaussianPeaksAtClassCenter) {
    const TargetSet t = make_target_set(TargetKind::gaussian, small_dataset(10, 1), 0);
    const auto centers = class_centers();
    for (std::size_t d = 0; d < 10; ++d) {
        const auto row = t.targets.row(d);
        const auto peak = std::ranges::max_element(row) - row.begin();
        EXPECT_EQ(*std::ranges::max_element(row), 1.0f);
        EXPECT_EQ(peak, centers[d].first * 28 + centers[d].second);
        // One pixel off-center: exp(-1 / (2 sigma^2)).
        EXPECT_NEAR(row[static_cast<std::size_t>(peak + 1)], std::exp(-1.0 / 8.0), 1e-7);
    }
}

TEST(Targets, CentersAreDistinctAndOnCircle) {
    const auto centers = class_centers();
    std::set<std::pair<int, int>> unique(centers.begin(), centers.end());
    EXPECT_EQ(unique.size(), 10u);
    for (auto [r, c] : centers) {
        EXPECT_NEAR(std::hypot(r - 13.5, c - 13.5), 9.0, 0.75);
    }
    EXPECT_EQ(centers[0], (std::pair<int, int>{5, 14}));
}

TEST(Targets, SquareAndWaveletGeometry) {
    const LabeledDataset ds = small_dataset(10, 1);
    const TargetSet sq = make_target_set(TargetKind::square, ds, 0);
    const TargetSet wv = make_target_set(TargetKind::wavelet, ds, 0);
    for (std::size_t d = 0; d < 10; ++d) {
        const auto row = sq.targets.row(d);
        EXPECT_EQ(std::count(row.begin(), row.end(), 1.0f), 36);
        const auto w = wv.targets.row(d);
        // Two of four 6x6 lobes are lit, unless the support hits the border.
        EXPECT_LE(std::count(w.begin(), w.end(), 1.0f), 72);
        EXPECT_GT(std::count(w.begin(), w.end(), 1.0f), 0);
    }
    const auto [r, c] = class_centers()[0];
    const auto w0 = wv.targets.row(0);
    EXPECT_EQ(w0[static_cast<std::size_t>((r - 1) * 28 + c - 1)], 1.0f);
    EXPECT_EQ(w0[static_cast<std::size_t>((r - 1) * 28 + c)], 0.0f);
    EXPECT_EQ(w0[static_cast<std::size_t>(r * 28 + c)], 1.0f);
}

TEST(Targets, AllKindsInUnitIntervalAndDeterministic) {
    const LabeledDataset ds = small_dataset(40, 3);
    for (TargetKind k : {TargetKind::exemplar, TargetKind::gaussian, TargetKind::square, TargetKind::wavelet}) {
        const TargetSet a = make_target_set(k, ds, 5);
        EXPECT_EQ(a.targets.shape(), (Shape{10, 28, 28, 1}));
        EXPECT_GE(a.min_value, 0.0f);
        EXPECT_LE(a.max_value, 1.0f);
        EXPECT_EQ(a.targets, make_target_set(k, ds, 5).targets);
    }
}

TEST(Targets, UnknownKindIsConfigError) {
    EXPECT_THROW(target_kind_from_string("circle"), ConfigError);
    EXPECT_EQ(target_kind_from_string("wavelet"), TargetKind::wavelet);
}

TEST(Batches, PartialFinalBatch) {
    const auto batches = batch_iter(small_dataset(10, 1), 4, 1, 0);
    ASSERT_EQ(batches.size(), 3u);
    EXPECT_EQ(batches[0].images.extent(0), 4u);
    EXPECT_EQ(batches[1].images.extent(0), 4u);
    EXPECT_EQ(batches[2].images.extent(0), 2u);
}

TEST(Batches, PartitionDatasetOncePerEpoch) {
    const LabeledDataset ds = small_dataset(37, 1);
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
        std::multiset<std::size_t> seen;
        for (const Batch& b : batch_iter(ds, 8, 99, epoch)) {
            seen.insert(b.indices.begin(), b.indices.end());
            for (std::size_t i = 0; i < b.indices.size(); ++i) {
                EXPECT_TRUE(std::ranges::equal(b.images.row(i), ds.image(b.indices[i])));
                EXPECT_EQ(b.onehot.at(i, b.labels[i]), 1.0f);
            }
        }
        EXPECT_EQ(seen.size(), 37u);
        EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 37u);
    }
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
    EXPECT_EQ(epoch_order(100, 3, 2), epoch_order(100, 3, 2));
    EXPECT_NE(epoch_order(100, 3, 2), epoch_order(100, 3, 3));
    EXPECT_NE(epoch_order(100, 3, 2), epoch_order(100, 4, 2));
}

TEST(Batches, ClassWeightColumnFollowsLabels) {
    ClassWeights w = uniform_class_weights();
    w[0] = 10.0f;
    w[3] = 0.1f;
    for (const Batch& b : batch_iter(small_dataset(30, 1), 7, 1, 0, w)) {
        for (std::size_t i = 0; i < b.labels.size(); ++i) {
            const float expected = b.labels[i] == 0 ? 10.0f : (b.labels[i] == 3 ? 0.1f : 1.0f);
            EXPECT_EQ(b.weights[i], expected);
        }
    }
}

TEST(Batches, InvalidBatchSizeIsConfigError) {
    EXPECT_THROW(batch_iter(small_dataset(3, 1), 0, 1, 0), ConfigError);
}

class MnistFixture : public ::testing::Test {
protected:
    void SetUp() override {
        const char* dir = std::getenv("BVAE_DATA_DIR");
        if (dir == nullptr) GTEST_SKIP() << "BVAE_DATA_DIR not set";
        data_dir = dir;
    }
    std::filesystem::path data_dir;
};

TEST_F(MnistFixture, StandardSplitsLoadWithChecksums) {
    const LabeledDataset train = load_mnist(data_dir, Split::train);
    const LabeledDataset test = load_mnist(data_dir, Split::test);
    EXPECT_EQ(train.images.shape(), (Shape{60000, 28, 28, 1}));
    EXPECT_EQ(test.images.shape(), (Shape{10000, 28, 28, 1}));
}

TEST_F(MnistFixture, RotationRoundTripMeanError) {
    const LabeledDataset test = take_prefix(load_mnist(data_dir, Split::test), 200);
    const auto angles = rotation_angles(test.size(), 1, Split::test);
    double worst = 0;
    double total = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto img = test.image(i);
        const auto back = rotate_image(rotate_image(img, -angles[i]), angles[i]);
        for (std::size_t p = 0; p < img.size(); ++p) {
            const double e = std::abs(back[p] - img[p]);
            worst = std::max(worst, e);
            total += e;
        }
    }
    const double mean = total / static_cast<double>(test.images.size());
    RecordProperty("max_abs_error", std::to_string(worst));
    RecordProperty("mean_abs_error", std::to_string(mean));
    // Sharp strokes make the per-pixel maximum large; the average stays small.
    EXPECT_LE(mean, 0.04);
}

} // namespace
} // namespace bvae::data
