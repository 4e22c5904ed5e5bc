#ifndef INFODESIGN_DENSITY_HPP
#define INFODESIGN_DENSITY_HPP

#include "infodesign/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace infodesign::density {

// Flattened P x P measurement crops, one per row (row-major within a patch).
struct PatchBatch {
    Eigen::MatrixXd patches;
    int patch_side = 0;

    Eigen::Index count() const { return patches.rows(); }
    Eigen::Index dim() const { return patches.cols(); }
    void validate() const;
};

// Full-covariance Gaussian, carried as mean plus the lower Cholesky factor
// of (sample covariance + lambda_reg * I).
struct GaussianModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;
    double lambda_reg = 0.0;
    bool fitted = false;

    Eigen::Index dim() const { return mean.size(); }
};

// EM-fitted Gaussian mixture. Fitting is an iterative, non-differentiable
// procedure; evaluation (log_prob and its input gradient) stays exact.
struct GmmModel {
    struct Component {
        double weight = 0.0;
        Eigen::VectorXd mean;
        Eigen::MatrixXd chol;
    };
    std::vector<Component> components;
    double lambda_reg = 0.0;
    bool fitted = false;
    std::vector<double> train_ll; // mean train log-likelihood per EM iteration (nats)

    Eigen::Index dim() const { return components.empty() ? 0 : components[0].mean.size(); }
};

using DensityModel = std::variant<GaussianModel, GmmModel>;

Eigen::Index model_dim(const DensityModel& model);
bool model_fitted(const DensityModel& model);

// mean = sample mean, Sigma = unbiased sample covariance + lambda_reg * I.
GaussianModel fit_gaussian(const PatchBatch& train, double lambda_reg);

// Default shrinkage when the caller does not pin lambda_reg:
// 1e-4 * (mean per-dimension variance of the batch).
double resolve_lambda_reg(const PatchBatch& train, std::optional<double> requested);

// Standard EM with distance-weighted seeding. Every M-step covariance gets
// + lambda_reg * I; empty components are reseeded from the lowest-likelihood
// patch at most 3 times. K = 1 delegates to fit_gaussian.
GmmModel fit_gmm_em(const PatchBatch& train, int k, int max_iters, double tol, double lambda_reg,
                    std::uint64_t seed);

// Exact log-density in nats; mixtures use log-sum-exp over components.
double log_prob(const DensityModel& model, const Eigen::VectorXd& patch);

// d log p / d y: -Sigma^{-1}(y - mu) for a Gaussian, responsibility-weighted
// sum of component gradients for a mixture.
Eigen::VectorXd log_prob_grad_y(const DensityModel& model, const Eigen::VectorXd& patch);

// (1/2) log2((2 pi e)^dim det Sigma), from the Cholesky diagonal.
double gaussian_entropy_analytic(const GaussianModel& model);

// -(1/M) sum log2 p(y_i): the held-out upper bound on H(Y), bits per patch.
double cross_entropy(const DensityModel& model, const PatchBatch& test);

// Reverse-mode pass through the whole fit-and-score pipeline:
//   train patches -> (mean, covariance) -> Cholesky -> log p(heldout_j).
// `logp_cotangent` weights each held-out log-density (nats); the return value
// is d(sum_j w_j log p(z_j)) / d(train patches). This is the extra gradient
// pathway the coupled optimizer uses and the alternating one drops.
Eigen::MatrixXd fit_gaussian_differentiable(const PatchBatch& train, const PatchBatch& heldout,
                                            const Eigen::VectorXd& logp_cotangent,
                                            double lambda_reg);

// Building blocks of the pass above, exposed for verification.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a);
// Given L = chol(A) and the cotangent accumulated on L, returns the cotangent
// on the lower triangle of A (the only part the factorization reads).
Eigen::MatrixXd cholesky_reverse(const Eigen::MatrixXd& chol, Eigen::MatrixXd chol_cotangent);

void save_model(const std::string& path, const DensityModel& model);
DensityModel load_model(const std::string& path);

} // namespace infodesign::density

#endif
