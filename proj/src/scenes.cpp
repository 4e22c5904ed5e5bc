#include "infodesign/scenes.hpp"

#include "infodesign/fft.hpp"
#include "infodesign/io.hpp"
#include "infodesign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace infodesign::scenes {

void SceneDataset::validate() const {
    if (images.size() < 2)
        throw SizingError("dataset needs at least 2 images, got " + std::to_string(images.size()));
    for (const Image& img : images) {
        if (img.rows() != side || img.cols() != side)
            throw ShapeError("dataset image does not match side " + std::to_string(side));
        if ((img < 0.0).any()) throw DomainError("dataset contains negative pixels");
    }
}

SceneDataset gen_correlated_field(int count, int side, double spectral_exponent,
                                  std::uint64_t seed) {
    if (count < 1) throw SizingError("gen_correlated_field: count must be positive");
    if (!is_pow2(side))
        throw SizingError("gen_correlated_field: side must be a power of two, got " +
                          std::to_string(side));
    if (spectral_exponent < 0.0 || spectral_exponent > 4.0)
        throw DomainError("gen_correlated_field: spectral_exponent must be in [0, 4]");

    // Amplitude filter; squaring gives the requested power law.
    Image filter(side, side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double fr = freq_index(r, side);
            double fc = freq_index(c, side);
            double f = std::sqrt(fr * fr + fc * fc);
            filter(r, c) = std::pow(1.0 + f, -spectral_exponent / 2.0);
        }

    SceneDataset ds;
    ds.side = side;
    ds.label = "correlated_field(e=" + std::to_string(spectral_exponent) + ")";
    ds.images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        CounterRng rng(derive_seed(seed, "correlated_field", static_cast<std::uint64_t>(i)));
        Image white(side, side);
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c)
                white(r, c) = rng.normal(static_cast<std::uint64_t>(r) * side + c);
        Image field = ifft2((fft2(white) * filter).eval()).real();
        double lo = field.minCoeff();
        double hi = field.maxCoeff();
        if (hi - lo < 1e-300)
            field.setZero();
        else
            field = (field - lo) / (hi - lo);
        ds.images.push_back(std::move(field));
    }
    return ds;
}

SceneDataset gen_sparse_spots(int count, int side, double density, double amplitude,
                              std::uint64_t seed) {
    if (count < 1) throw SizingError("gen_sparse_spots: count must be positive");
    if (side < 1) throw SizingError("gen_sparse_spots: side must be positive");
    if (density <= 0.0 || density > 1.0)
        throw DomainError("gen_sparse_spots: density must be in (0, 1]");
    const double npix = static_cast<double>(side) * side;
    if (density * npix < 1.0)
        throw SizingError("gen_sparse_spots: density*side^2 < 1 leaves no spots");
    const int spots = static_cast<int>(std::ceil(density * npix));

    SceneDataset ds;
    ds.side = side;
    ds.label = "sparse_spots(d=" + std::to_string(density) + ")";
    ds.images.reserve(static_cast<std::size_t>(count));
    std::vector<int> idx(static_cast<std::size_t>(side) * side);
    for (int i = 0; i < count; ++i) {
        SeqRng rng(derive_seed(seed, "sparse_spots", static_cast<std::uint64_t>(i)));
        for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
        // Partial Fisher-Yates: first `spots` entries are a uniform draw
        // without replacement.
        for (int j = 0; j < spots; ++j) {
            std::size_t k = j + static_cast<std::size_t>(rng.below(idx.size() - j));
            std::swap(idx[static_cast<std::size_t>(j)], idx[k]);
        }
        Image img = Image::Zero(side, side);
        for (int j = 0; j < spots; ++j) img(idx[j] / side, idx[j] % side) = amplitude;
        ds.images.push_back(std::move(img));
    }
    return ds;
}

SceneDataset load_raw_images(const std::string& path, int side, std::optional<int> count_limit) {
    namespace fs = std::filesystem;
    std::vector<Image> raw;
    std::string label;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".pfm")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw SizingError("load_raw_images: no PFM files in " + path);
        for (const auto& f : files) {
            if (count_limit && static_cast<int>(raw.size()) >= *count_limit) break;
            Image img = io::read_pfm(f.string());
            if (img.rows() != side || img.cols() != side)
                throw ShapeError("load_raw_images: " + f.string() + " is not " +
                                 std::to_string(side) + "x" + std::to_string(side));
            raw.push_back(std::move(img));
        }
        label = "pfm_dir:" + path;
    } else {
        raw = io::read_idx(path, count_limit);
        for (const Image& img : raw)
            if (img.rows() != side || img.cols() != side)
                throw ShapeError("load_raw_images: IDX images are not " + std::to_string(side) +
                                 "x" + std::to_string(side));
        label = "idx:" + path;
    }
    if (raw.empty()) throw SizingError("load_raw_images: no images loaded from " + path);

    double hi = 0.0;
    for (Image& img : raw) {
        img = img.max(0.0);
        hi = std::max(hi, img.maxCoeff());
    }
    if (hi > 0.0)
        for (Image& img : raw) img /= hi;

    SceneDataset ds;
    ds.side = side;
    ds.label = label;
    ds.images = std::move(raw);
    return ds;
}

std::pair<SceneDataset, SceneDataset> split(const SceneDataset& dataset, double train_fraction,
                                            std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw DomainError("split: train_fraction must be in (0, 1)");
    const std::size_t n = dataset.images.size();
    std::size_t train_n = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (train_n < 1 || train_n >= n)
        throw SizingError("split: fraction " + std::to_string(train_fraction) + " over " +
                          std::to_string(n) + " images would empty one side");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SeqRng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    SceneDataset train, test;
    train.side = test.side = dataset.side;
    train.label = dataset.label + "/train";
    test.label = dataset.label + "/test";
    for (std::size_t i = 0; i < n; ++i) {
        (i < train_n ? train : test).images.push_back(dataset.images[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

} // namespace infodesign::scenes
