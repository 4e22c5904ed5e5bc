#include "infodesign/fft.hpp"
#include "infodesign/io.hpp"
#include "infodesign/scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

using namespace infodesign;
using scenes::SceneDataset;

namespace {

double lag1_autocorr(const Image& img) {
    const Eigen::Index n = img.rows();
    double mean = img.mean();
    double var = (img - mean).square().sum();
    double cov = 0.0;
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c + 1 < n; ++c)
            cov += (img(r, c) - mean) * (img(r, c + 1) - mean);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r + 1 < n; ++r)
            cov += (img(r, c) - mean) * (img(r + 1, c) - mean);
    return cov / (2.0 * var);
}

// Independent oracle for the spectral-exponent contract: radially averaged
// power spectrum, least-squares slope of log P against log(1 + r).
double radial_spectrum_slope(const std::vector<Image>& images) {
    const int n = static_cast<int>(images[0].rows());
    std::vector<double> power(static_cast<std::size_t>(n), 0.0);
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    for (const Image& img : images) {
        ComplexField f = fft2(img);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                double fr = freq_index(r, n);
                double fc = freq_index(c, n);
                int bin = static_cast<int>(std::lround(std::sqrt(fr * fr + fc * fc)));
                if (bin < 1 || bin >= n / 2) continue;
                power[static_cast<std::size_t>(bin)] += std::norm(f(r, c));
                hits[static_cast<std::size_t>(bin)] += 1;
            }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int b = 1; b < n / 2; ++b) {
        if (hits[static_cast<std::size_t>(b)] == 0) continue;
        double x = std::log(1.0 + b);
        double y = std::log(power[static_cast<std::size_t>(b)] / hits[static_cast<std::size_t>(b)]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

bool datasets_equal(const SceneDataset& a, const SceneDataset& b) {
    if (a.images.size() != b.images.size()) return false;
    for (std::size_t i = 0; i < a.images.size(); ++i)
        if ((a.images[i] != b.images[i]).any()) return false;
    return true;
}

} // namespace

TEST_CASE("correlated field: flat spectrum is white") {
    SceneDataset ds = scenes::gen_correlated_field(4, 16, 0.0, 7);
    REQUIRE(ds.images.size() == 4);
    double acc = 0.0;
    for (const Image& img : ds.images) {
        CHECK(img.minCoeff() >= 0.0);
        CHECK(img.maxCoeff() <= 1.0);
        acc += lag1_autocorr(img);
    }
    CHECK(std::abs(acc / 4.0) < 0.1);
}

TEST_CASE("correlated field: power-law slope matches the exponent") {
    SceneDataset ds = scenes::gen_correlated_field(2, 32, 2.0, 1);
    double slope = radial_spectrum_slope(ds.images);
    CHECK(slope == doctest::Approx(-2.0).epsilon(0.15)); // +-0.3 on a slope of 2
}

TEST_CASE("correlated field: deterministic under seed") {
    SceneDataset a = scenes::gen_correlated_field(1, 16, 1.0, 5);
    SceneDataset b = scenes::gen_correlated_field(1, 16, 1.0, 5);
    CHECK(datasets_equal(a, b));
}

TEST_CASE("correlated field: rejects non-power-of-two sides") {
    CHECK_THROWS_AS(scenes::gen_correlated_field(1, 17, 1.0, 0), SizingError);
}

TEST_CASE("sparse spots: exact count and amplitude") {
    SceneDataset ds = scenes::gen_sparse_spots(1, 10, 0.05, 1.0, 0);
    const Image& img = ds.images[0];
    CHECK((img > 0.0).count() == 5);
    CHECK(((img == 0.0) || (img == 1.0)).all());
}

TEST_CASE("sparse spots: dataset mean follows the ceil'd density") {
    // ceil(0.02 * 256) = 6 spots, so the exact mean is 6/256 per image.
    SceneDataset ds = scenes::gen_sparse_spots(100, 16, 0.02, 1.0, 3);
    double mean = 0.0;
    for (const Image& img : ds.images) mean += img.mean();
    mean /= 100.0;
    CHECK(mean == doctest::Approx(6.0 / 256.0).epsilon(1e-12));
    CHECK(std::abs(mean - 0.02) / 0.02 < 0.2);
}

TEST_CASE("sparse spots: full density fills the image") {
    SceneDataset ds = scenes::gen_sparse_spots(1, 4, 1.0, 2.0, 9);
    CHECK((ds.images[0] == 2.0).all());
}

TEST_CASE("sparse spots: sub-pixel density is rejected") {
    CHECK_THROWS_AS(scenes::gen_sparse_spots(1, 4, 0.05, 1.0, 0), SizingError);
}

TEST_CASE("split: counts, disjointness, determinism") {
    SceneDataset ds = scenes::gen_sparse_spots(10, 8, 0.1, 1.0, 11);
    auto [train, test] = scenes::split(ds, 0.8, 42);
    CHECK(train.images.size() == 8);
    CHECK(test.images.size() == 2);

    auto [train95, test95] = scenes::split(ds, 0.95, 42);
    CHECK(train95.images.size() == 9);
    CHECK(test95.images.size() == 1);

    // partition: every original image appears exactly once across the splits
    auto key = [](const Image& img) {
        return io::fnv1a64(img.data(), sizeof(double) * static_cast<std::size_t>(img.size()));
    };
    std::multiset<std::uint64_t> orig, parts;
    for (const Image& img : ds.images) orig.insert(key(img));
    for (const Image& img : train.images) parts.insert(key(img));
    for (const Image& img : test.images) parts.insert(key(img));
    CHECK(orig == parts);

    auto [train2, test2] = scenes::split(ds, 0.8, 42);
    CHECK(datasets_equal(train, train2));
    CHECK(datasets_equal(test, test2));

    SceneDataset one;
    one.side = 8;
    one.images.push_back(Image::Zero(8, 8));
    CHECK_THROWS_AS(scenes::split(one, 0.5, 0), SizingError);
}

TEST_CASE("load_raw_images: IDX and PFM sources") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "infodesign_scenes_test";
    fs::create_directories(dir);

    SUBCASE("IDX round trip with max rescale") {
        std::vector<Image> imgs;
        for (int i = 0; i < 3; ++i) {
            Image img = Image::Constant(28, 28, 10.0 * (i + 1));
            img(0, 0) = i == 2 ? 200.0 : 0.0;
            imgs.push_back(img);
        }
        std::string path = (dir / "digits.idx").string();
        io::write_idx(path, imgs);
        SceneDataset ds = scenes::load_raw_images(path, 28);
        CHECK(ds.images.size() == 3);
        double hi = 0.0;
        for (const Image& img : ds.images) hi = std::max(hi, img.maxCoeff());
        CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("IDX with a bad magic reports byte offset 0") {
        std::string path = (dir / "broken.idx").string();
        std::ofstream(path) << "not an idx file at all";
        try {
            scenes::load_raw_images(path, 28);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
        }
    }

    SUBCASE("PFM directory honors count_limit") {
        fs::path sub = dir / "pfms";
        fs::create_directories(sub);
        io::write_pfm((sub / "a.pfm").string(), Image::Constant(16, 16, 0.5));
        io::write_pfm((sub / "b.pfm").string(), Image::Constant(16, 16, 0.25));
        SceneDataset ds = scenes::load_raw_images(sub.string(), 16, 1);
        CHECK(ds.images.size() == 1);
    }

    SUBCASE("empty directory is a sizing error") {
        fs::path sub = dir / "empty";
        fs::create_directories(sub);
        CHECK_THROWS_AS(scenes::load_raw_images(sub.string(), 16), SizingError);
    }
}
