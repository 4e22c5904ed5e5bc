#ifndef INFODESIGN_SCENES_HPP
#define INFODESIGN_SCENES_HPP

#include "infodesign/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace infodesign::scenes {

// Object dataset the system is optimized for. Pixel values are nonnegative
// photon rates normalized to [0, 1]; physical photon counts are applied by
// the noise model's photon-scale parameter.
struct SceneDataset {
    std::vector<Image> images;
    int side = 0;
    std::string label;

    std::size_t size() const { return images.size(); }
    void validate() const;
};

// Stationary random field with power spectrum proportional to
// (1 + |f|)^(-spectral_exponent), |f| in integer frequency bins. Each image
// is a spectrally filtered unit white-noise field, min-max rescaled to [0,1].
SceneDataset gen_correlated_field(int count, int side, double spectral_exponent,
                                  std::uint64_t seed);

// Zero background with ceil(density * side^2) pixels set to `amplitude`,
// positions uniform without replacement.
SceneDataset gen_sparse_spots(int count, int side, double density, double amplitude,
                              std::uint64_t seed);

// Loads an IDX unsigned-byte tensor file or a directory of grayscale PFM
// files; pixels are clamped at 0 and rescaled so the dataset maximum is 1.
SceneDataset load_raw_images(const std::string& path, int side,
                             std::optional<int> count_limit = std::nullopt);

// Disjoint shuffled partition; train count = floor(fraction * n), test keeps
// the remainder. Both sides must end up nonempty.
std::pair<SceneDataset, SceneDataset> split(const SceneDataset& dataset, double train_fraction,
                                            std::uint64_t seed);

} // namespace infodesign::scenes

#endif
