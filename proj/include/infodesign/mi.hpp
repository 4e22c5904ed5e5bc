#ifndef INFODESIGN_MI_HPP
#define INFODESIGN_MI_HPP

#include "infodesign/common.hpp"
#include "infodesign/density.hpp"
#include "infodesign/noise.hpp"
#include "infodesign/optics.hpp"
#include "infodesign/scenes.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace infodesign::mi {

// I(X;Y) = H(Y) - H(Y|X), assembled from the cross-entropy bound and the
// analytic conditional entropy. All entropies are bits per patch.
struct MiEstimate {
    double h_y = 0.0;
    double h_y_given_x = 0.0;
    double mi_total = 0.0;
    double mi_per_pixel = 0.0;
    Eigen::Index m_test = 0;
};

struct PatchIndex {
    int image = 0;
    int row = 0;
    int col = 0;
};

// `count` patches at uniform random offsets. (image, offset) pairs are drawn
// without replacement until the distinct pool is exhausted, then fresh rounds
// begin. Patches are flattened row-major.
density::PatchBatch extract_patches(const std::vector<Image>& measurements, int patch_side,
                                    int count, std::uint64_t seed);
std::pair<density::PatchBatch, std::vector<PatchIndex>> extract_patches_indexed(
    const std::vector<Image>& measurements, int patch_side, int count, std::uint64_t seed);

// Draws one noise realization per test patch, scores it under the model.
MiEstimate estimate_mi(const density::DensityModel& model, const noise::NoiseModel& noise,
                       const density::PatchBatch& noiseless_test, std::uint64_t seed);

// One full simulate-measure-extract pass under the current encoder. Keeps
// every intermediate the reverse pass needs.
struct SimulatedBatch {
    optics::Psf psf;
    std::vector<Image> raw;       // circular convolutions before clamping
    std::vector<Image> noiseless; // clamped measurements x
    std::vector<Image> noisy;     // y = noise(x)
    density::PatchBatch y_patches;
    density::PatchBatch x_patches;
    std::vector<PatchIndex> records;
    std::uint64_t seed = 0;
};
SimulatedBatch simulate_batch(const optics::EncoderParams& params, const noise::NoiseModel& noise,
                              const scenes::SceneDataset& dataset, int patch_side, int count,
                              std::uint64_t seed);

// Reverse pass of simulate_batch: scatters per-patch cotangents on the noisy
// patches (rows of y_patch_cotangent) back through the noise reparameterization
// and the convolution, plus `centropy_scale` times the conditional-entropy
// gradient for every extracted patch, and returns the PSF cotangent.
Image batch_psf_cotangent(const noise::NoiseModel& noise, const scenes::SceneDataset& dataset,
                          const SimulatedBatch& batch, const Eigen::MatrixXd& y_patch_cotangent,
                          double centropy_scale);

// Loss -I(X;Y) in bits/patch and its gradient with respect to the encoder,
// holding the fitted model constant (the alternating-update estimator path).
struct LossGrad {
    double loss_bits = 0.0;
    double h_y = 0.0;
    double h_y_given_x = 0.0;
    optics::EncoderGrad grad;
};
LossGrad mi_loss_grad(const optics::EncoderParams& params, const density::DensityModel& model,
                      const noise::NoiseModel& noise, const scenes::SceneDataset& dataset,
                      int patch_side, int patch_count, std::uint64_t seed);

// Ascending held-out cross-entropy; ties keep the earlier model first.
struct ModelRank {
    int index = 0;
    double cross_entropy_bits = 0.0;
};
std::vector<ModelRank> compare_models(const std::vector<const density::DensityModel*>& models,
                                      const density::PatchBatch& test);

} // namespace infodesign::mi

#endif
