#ifndef INFODESIGN_OPTICS_HPP
#define INFODESIGN_OPTICS_HPP

#include "infodesign/common.hpp"

#include <string>
#include <variant>
#include <vector>

namespace infodesign::optics {

// Diffractive element: pixelwise height map h(x, y) imparting a phase delay
// phi = (2*pi/lambda) * delta_n * h. All lengths in meters.
struct HeightMapParams {
    Image heights;
    double pixel_pitch = 1e-6;
    double wavelength = 650e-9;
    double delta_n = 0.4599;
    double propagation_distance = 1e-4;
    double h_max = 650e-9 / 0.4599; // one full wave of phase by default

    int side() const { return static_cast<int>(heights.rows()); }
    void validate() const;
};

// Lenslet-array PSF: an equal-weight sum of K 2-D Gaussians on the sensor
// grid. Means are (x, y) = (col, row) pixel coordinates; covariances are
// carried as lower-triangular Cholesky factors [l00 0; l10 l11].
struct LensletPsfParams {
    struct Lenslet {
        Eigen::Vector2d mean;
        double l00 = 1.0, l10 = 0.0, l11 = 1.0;
    };
    std::vector<Lenslet> lenslets;
    int side = 32;                // sensor grid the PSF is rasterized on
    double diag_floor = 1e-3;     // keeps each covariance positive definite

    int count() const { return static_cast<int>(lenslets.size()); }
    void validate() const;
};

using EncoderParams = std::variant<HeightMapParams, LensletPsfParams>;

// Discretized point-spread function; values are nonnegative and sum to 1.
struct Psf {
    Image values;
    double normalization = 1.0; // pre-normalization energy
};

// Gradient carriers matching the parameter structure.
using HeightMapGrad = Image;
struct LensletGrad {
    struct PerLenslet {
        Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
        double d_l00 = 0.0, d_l10 = 0.0, d_l11 = 0.0;
    };
    std::vector<PerLenslet> lenslets;
};
using EncoderGrad = std::variant<HeightMapGrad, LensletGrad>;

// phi = (2*pi/lambda) * delta_n * h, elementwise.
Image phase_from_height(const HeightMapParams& params);

// Exact scalar propagation between parallel planes: multiply the spectrum by
// exp(i*2*pi*z*sqrt(1/lambda^2 - fx^2 - fy^2)); evanescent components are
// zeroed. Requires a square power-of-two grid and z >= 0.
ComplexField angular_spectrum_propagate(const ComplexField& field, double z, double wavelength,
                                        double pitch);

// Uniform-amplitude aperture with the height map's phase, propagated by z;
// PSF = |u|^2 normalized to unit sum. pad > 1 embeds the aperture in a grid
// `pad` times larger (zero amplitude outside the map).
Psf psf_from_heightmap(const HeightMapParams& params, int pad = 1);

// Equal-weight Gaussian sum rasterized on a side x side grid, renormalized.
Psf psf_from_lenslets(const LensletPsfParams& params, int side);

// Noiseless measurement: circular FFT convolution of scene and PSF, with
// tiny FFT-roundoff negatives clamped to zero.
Image image_formation(const Image& scene, const Psf& psf);

// Vector-Jacobian product of theta -> image_formation(scene, psf(theta)).
EncoderGrad forward_vjp(const EncoderParams& params, const Image& scene, const Image& cotangent);

// --- helpers shared by the estimator/optimizer pipelines ---

// PSF for either encoder kind (heightmaps unpadded; lenslets on params.side).
Psf encoder_psf(const EncoderParams& params);
int encoder_grid_side(const EncoderParams& params);

// Adjoint of theta -> psf(theta) alone, for callers that accumulate one PSF
// cotangent across many scenes.
EncoderGrad psf_backward(const EncoderParams& params, const Image& psf_cotangent);
// Adjoint of psf -> image_formation(scene, psf).
Image image_formation_psf_cotangent(const Image& scene, const Image& measurement_cotangent);

// Flattened optimization view. Height maps are exposed as heights / h_max so
// every encoder's coordinates are O(1); gradients follow the same scaling.
Eigen::VectorXd to_vector(const EncoderParams& params);
void set_from_vector(EncoderParams& params, const Eigen::VectorXd& v);
Eigen::VectorXd grad_to_vector(const EncoderParams& params, const EncoderGrad& grad);
std::size_t param_count(const EncoderParams& params);

// Clamps parameters back onto their feasible set (height clip, mean clamp,
// Cholesky diagonal floor). Applied after every optimizer update.
void project(EncoderParams& params);

void save_encoder(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder(const std::string& path);

} // namespace infodesign::optics

#endif
