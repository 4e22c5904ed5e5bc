#ifndef INFODESIGN_OPTIMIZE_HPP
#define INFODESIGN_OPTIMIZE_HPP

#include "infodesign/mi.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace infodesign::optimize {

enum class Mode { Ideal, IdealIo };

struct DensitySpec {
    enum class Kind { Gaussian, Gmm };
    Kind kind = Kind::Gaussian;
    std::optional<double> lambda_reg; // default: scale-relative shrinkage
    int gmm_components = 2;
    int gmm_em_iters = 50;
    double gmm_tol = 1e-6;
};

struct OptimizerSpec {
    enum class Kind { Sgd, Adam };
    Kind kind = Kind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptConfig {
    Mode mode = Mode::IdealIo;
    int steps = 100;
    double step_size = 1e-2;
    int refit_every = 1; // alternating mode only
    int patch_side = 8;
    int train_patch_count = 0; // 0 resolves to 5 * patch_side^2
    int test_patch_count = 0;  // 0 resolves to max(64, patch_side^2)
    double train_fraction = 0.5;
    DensitySpec density;
    OptimizerSpec optimizer;
    std::uint64_t seed = 0;

    int resolved_train_count() const;
    int resolved_test_count() const;
    void validate() const;
};

struct StepRecord {
    int step = 0;
    double loss_bits = 0.0; // -MI, bits/patch
    double h_y_bits = 0.0;
    double h_ygx_bits = 0.0;
    bool refit = false;
    double wall_time_s = 0.0;
    std::int64_t peak_alloc_bytes = -1; // -1 when instrumentation is absent
};
using OptTrace = std::vector<StepRecord>;

struct RunResult {
    optics::EncoderParams params;
    OptTrace trace;
    density::DensityModel model;
    std::optional<int> aborted_at; // first step with a non-finite loss/update
};

// Gradient of the coupled objective: the density refit happens inside the
// differentiated pipeline, adding the fit-pathway term on top of the shared
// evaluation-path gradient. Gaussian density only.
struct IdealGradient {
    double loss_bits = 0.0;
    double h_y = 0.0;
    double h_ygx = 0.0;
    Eigen::VectorXd grad;         // total, flattened optimization view
    Eigen::VectorXd grad_coupled; // the fit-pathway contribution alone
};
IdealGradient ideal_gradient(const optics::EncoderParams& params, const noise::NoiseModel& noise,
                             const scenes::SceneDataset& train_scenes,
                             const scenes::SceneDataset& test_scenes, const OptConfig& config,
                             int step);

// Refits the density model on fresh measurements from the current encoder,
// with no gradient bookkeeping.
density::DensityModel refit_model(const optics::EncoderParams& params,
                                  const noise::NoiseModel& noise,
                                  const scenes::SceneDataset& train_scenes,
                                  const OptConfig& config, int step);

// Evaluation-path gradient holding the fitted model constant.
struct IoGradient {
    double loss_bits = 0.0;
    double h_y = 0.0;
    double h_ygx = 0.0;
    Eigen::VectorXd grad;
};
IoGradient ideal_io_gradient(const optics::EncoderParams& params,
                             const density::DensityModel& model, const noise::NoiseModel& noise,
                             const scenes::SceneDataset& test_scenes, const OptConfig& config,
                             int step);

// Full optimization loop. Scenes are split into disjoint fit/eval pools;
// the trace records one row per completed step.
RunResult run(const scenes::SceneDataset& dataset, const optics::EncoderParams& encoder_init,
              const noise::NoiseModel& noise, const OptConfig& config);

// Central-difference verification. Probes `probes` random coordinates with
// step 1e-4 * (1 + |theta_j|) and returns the worst relative error; probes
// where both the analytic and numeric values are below 1e-10 count as exact.
double finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                         const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic_grad,
                         int probes, std::uint64_t seed);

// Spec'd convenience form: checks mi_loss_grad for the given setup.
double finite_diff_check(const optics::EncoderParams& params, const density::DensityModel& model,
                         const noise::NoiseModel& noise, const scenes::SceneDataset& dataset,
                         int patch_side, int patch_count, std::uint64_t seed, int probes);

void write_trace_csv(const std::string& path, const OptTrace& trace);

} // namespace infodesign::optimize

#endif
