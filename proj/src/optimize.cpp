#include "infodesign/optimize.hpp"

#include "infodesign/io.hpp"
#include "infodesign/memhook.hpp"
#include "infodesign/rng.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace infodesign::optimize {

int OptConfig::resolved_train_count() const {
    return train_patch_count > 0 ? train_patch_count : 5 * patch_side * patch_side;
}

int OptConfig::resolved_test_count() const {
    return test_patch_count > 0 ? test_patch_count : std::max(64, patch_side * patch_side);
}

void OptConfig::validate() const {
    if (steps < 1) throw ConfigError("optimize: steps must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("optimize: step_size must be positive");
    if (refit_every < 1) throw ConfigError("optimize: refit_every must be >= 1");
    if (patch_side < 1) throw ConfigError("optimize: patch_side must be >= 1");
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ConfigError("optimize: train_fraction must be in (0, 1)");
    if (resolved_train_count() < 2) throw ConfigError("optimize: train_patch_count too small");
    if (resolved_test_count() < 1) throw ConfigError("optimize: test_patch_count too small");
}

density::DensityModel refit_model(const optics::EncoderParams& params,
                                  const noise::NoiseModel& noise,
                                  const scenes::SceneDataset& train_scenes,
                                  const OptConfig& config, int step) {
    mi::SimulatedBatch batch = mi::simulate_batch(
        params, noise, train_scenes, config.patch_side, config.resolved_train_count(),
        derive_seed(config.seed, "fit", static_cast<std::uint64_t>(step)));
    double lambda = density::resolve_lambda_reg(batch.y_patches, config.density.lambda_reg);
    if (config.density.kind == DensitySpec::Kind::Gaussian)
        return density::fit_gaussian(batch.y_patches, lambda);
    return density::fit_gmm_em(batch.y_patches, config.density.gmm_components,
                               config.density.gmm_em_iters, config.density.gmm_tol, lambda,
                               derive_seed(config.seed, "em", static_cast<std::uint64_t>(step)));
}

IoGradient ideal_io_gradient(const optics::EncoderParams& params,
                             const density::DensityModel& model, const noise::NoiseModel& noise,
                             const scenes::SceneDataset& test_scenes, const OptConfig& config,
                             int step) {
    mi::LossGrad lg = mi::mi_loss_grad(
        params, model, noise, test_scenes, config.patch_side, config.resolved_test_count(),
        derive_seed(config.seed, "eval", static_cast<std::uint64_t>(step)));
    IoGradient out;
    out.loss_bits = lg.loss_bits;
    out.h_y = lg.h_y;
    out.h_ygx = lg.h_y_given_x;
    out.grad = optics::grad_to_vector(params, lg.grad);
    return out;
}

IdealGradient ideal_gradient(const optics::EncoderParams& params, const noise::NoiseModel& noise,
                             const scenes::SceneDataset& train_scenes,
                             const scenes::SceneDataset& test_scenes, const OptConfig& config,
                             int step) {
    if (config.density.kind != DensitySpec::Kind::Gaussian)
        throw UnsupportedModelError(
            "coupled mode requires a Gaussian density: iterative EM fitting cannot be "
            "differentiated through");

    // Fresh train batch, fitted inside the differentiation path.
    mi::SimulatedBatch train_batch = mi::simulate_batch(
        params, noise, train_scenes, config.patch_side, config.resolved_train_count(),
        derive_seed(config.seed, "fit", static_cast<std::uint64_t>(step)));
    double lambda = density::resolve_lambda_reg(train_batch.y_patches, config.density.lambda_reg);
    density::DensityModel model = density::fit_gaussian(train_batch.y_patches, lambda);

    // Shared evaluation path on the held-out batch (identical to the
    // alternating scheme with this model held fixed).
    mi::SimulatedBatch test_batch = mi::simulate_batch(
        params, noise, test_scenes, config.patch_side, config.resolved_test_count(),
        derive_seed(config.seed, "eval", static_cast<std::uint64_t>(step)));
    const Eigen::Index m = test_batch.y_patches.count();
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> logp(static_cast<std::size_t>(m));
    std::vector<double> cond(static_cast<std::size_t>(m));
    Eigen::MatrixXd y_cot(m, test_batch.y_patches.dim());
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        Eigen::Index ii = static_cast<Eigen::Index>(i);
        Eigen::VectorXd y = test_batch.y_patches.patches.row(ii).transpose();
        logp[i] = density::log_prob(model, y);
        y_cot.row(ii) = (inv_m / kLn2) * density::log_prob_grad_y(model, y).transpose();
        Image x(config.patch_side, config.patch_side);
        for (int r = 0; r < config.patch_side; ++r)
            for (int c = 0; c < config.patch_side; ++c)
                x(r, c) = test_batch.x_patches.patches(
                    ii, static_cast<Eigen::Index>(r) * config.patch_side + c);
        cond[i] = noise::conditional_entropy(noise, x);
    });

    IdealGradient out;
    out.h_y = -pairwise_mean(logp) / kLn2;
    out.h_ygx = pairwise_mean(cond);
    out.loss_bits = out.h_ygx - out.h_y;

    Image psf_cot_shared = mi::batch_psf_cotangent(noise, test_scenes, test_batch, y_cot, inv_m);
    Eigen::VectorXd grad_shared =
        optics::grad_to_vector(params, optics::psf_backward(params, psf_cot_shared));

    // Coupled pathway: the held-out log-densities seen through the fitted
    // parameters' dependence on the train measurements.
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, inv_m / kLn2);
    Eigen::MatrixXd train_cot = density::fit_gaussian_differentiable(
        train_batch.y_patches, test_batch.y_patches, w, lambda);
    Image psf_cot_coupled =
        mi::batch_psf_cotangent(noise, train_scenes, train_batch, train_cot, 0.0);
    out.grad_coupled =
        optics::grad_to_vector(params, optics::psf_backward(params, psf_cot_coupled));
    out.grad = grad_shared + out.grad_coupled;
    return out;
}

namespace {

struct MomentState {
    Eigen::VectorXd m1;
    Eigen::VectorXd m2;
    int t = 0;
};

void apply_update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, const OptConfig& config,
                  MomentState& state) {
    if (config.optimizer.kind == OptimizerSpec::Kind::Sgd) {
        theta -= config.step_size * grad;
        return;
    }
    const double b1 = config.optimizer.beta1;
    const double b2 = config.optimizer.beta2;
    if (state.m1.size() != theta.size()) {
        state.m1 = Eigen::VectorXd::Zero(theta.size());
        state.m2 = Eigen::VectorXd::Zero(theta.size());
        state.t = 0;
    }
    state.t += 1;
    state.m1 = b1 * state.m1 + (1.0 - b1) * grad;
    state.m2 = b2 * state.m2 + (1.0 - b2) * grad.array().square().matrix();
    double c1 = 1.0 - std::pow(b1, state.t);
    double c2 = 1.0 - std::pow(b2, state.t);
    theta -= (config.step_size * (state.m1 / c1).array() /
              ((state.m2 / c2).array().sqrt() + config.optimizer.eps))
                 .matrix();
}

} // namespace

RunResult run(const scenes::SceneDataset& dataset, const optics::EncoderParams& encoder_init,
              const noise::NoiseModel& noise, const OptConfig& config) {
    config.validate();
    dataset.validate();
    if (config.mode == Mode::Ideal && config.density.kind != DensitySpec::Kind::Gaussian)
        throw UnsupportedModelError(
            "coupled mode requires a Gaussian density: iterative EM fitting cannot be "
            "differentiated through");

    auto [train_scenes, test_scenes] =
        scenes::split(dataset, config.train_fraction, derive_seed(config.seed, "scene_split"));

    RunResult result;
    result.params = encoder_init;
    optics::project(result.params);
    MomentState moments;

    const bool mem = memhook::available();
    for (int step = 0; step < config.steps; ++step) {
        auto t0 = std::chrono::steady_clock::now();
        std::int64_t mem_base = 0;
        if (mem) {
            mem_base = memhook::current_bytes();
            memhook::reset_peak();
        }

        StepRecord rec;
        rec.step = step;
        Eigen::VectorXd grad;
        try {
            if (config.mode == Mode::IdealIo) {
                if (step % config.refit_every == 0) {
                    result.model = refit_model(result.params, noise, train_scenes, config, step);
                    rec.refit = true;
                }
                IoGradient g =
                    ideal_io_gradient(result.params, result.model, noise, test_scenes, config, step);
                rec.loss_bits = g.loss_bits;
                rec.h_y_bits = g.h_y;
                rec.h_ygx_bits = g.h_ygx;
                grad = std::move(g.grad);
            } else {
                IdealGradient g =
                    ideal_gradient(result.params, noise, train_scenes, test_scenes, config, step);
                rec.refit = true; // the coupled mode fits a fresh model every step
                rec.loss_bits = g.loss_bits;
                rec.h_y_bits = g.h_y;
                rec.h_ygx_bits = g.h_ygx;
                grad = std::move(g.grad);
            }
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (at step " + std::to_string(step) + ")");
        }

        if (!std::isfinite(rec.loss_bits) || !grad.allFinite()) {
            result.aborted_at = step;
            break;
        }

        Eigen::VectorXd theta = optics::to_vector(result.params);
        apply_update(theta, grad, config, moments);
        if (!theta.allFinite()) {
            result.aborted_at = step;
            break;
        }
        optics::set_from_vector(result.params, theta);
        optics::project(result.params);

        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.peak_alloc_bytes = mem ? memhook::peak_bytes() - mem_base : -1;
        result.trace.push_back(rec);
    }

    // One last refit so the returned model describes the returned encoder.
    result.model = refit_model(result.params, noise, train_scenes, config, config.steps);
    return result;
}

double finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                         const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic_grad,
                         int probes, std::uint64_t seed) {
    if (theta.size() != analytic_grad.size())
        throw ShapeError("finite_diff_check: gradient length mismatch");
    SeqRng rng(derive_seed(seed, "fd_probe"));
    double worst = 0.0;
    for (int k = 0; k < probes; ++k) {
        Eigen::Index j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
        double h = 1e-4 * (1.0 + std::abs(theta(j)));
        Eigen::VectorXd tp = theta, tm = theta;
        tp(j) += h;
        tm(j) -= h;
        double numeric = (loss(tp) - loss(tm)) / (2.0 * h);
        double analytic = analytic_grad(j);
        if (std::abs(analytic) < 1e-10 && std::abs(numeric) < 1e-10) continue;
        double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

double finite_diff_check(const optics::EncoderParams& params, const density::DensityModel& model,
                         const noise::NoiseModel& noise, const scenes::SceneDataset& dataset,
                         int patch_side, int patch_count, std::uint64_t seed, int probes) {
    if (optics::param_count(params) > 10000)
        throw SizingError("finite_diff_check: parameter count exceeds the desk-scale limit");
    mi::LossGrad lg = mi::mi_loss_grad(params, model, noise, dataset, patch_side, patch_count, seed);
    Eigen::VectorXd analytic = optics::grad_to_vector(params, lg.grad);
    Eigen::VectorXd theta0 = optics::to_vector(params);
    optics::EncoderParams scratch = params;
    auto loss = [&](const Eigen::VectorXd& theta) {
        optics::set_from_vector(scratch, theta);
        return mi::mi_loss_grad(scratch, model, noise, dataset, patch_side, patch_count, seed)
            .loss_bits;
    };
    return finite_diff_check(loss, theta0, analytic, probes, seed);
}

void write_trace_csv(const std::string& path, const OptTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out << "step,loss_bits,h_y_bits,h_ygx_bits,refit,wall_time_s,peak_alloc_bytes\n";
    for (const StepRecord& r : trace) {
        out << r.step << ',' << io::fmt_double(r.loss_bits) << ',' << io::fmt_double(r.h_y_bits)
            << ',' << io::fmt_double(r.h_ygx_bits) << ',' << (r.refit ? 1 : 0) << ','
            << io::fmt_double(r.wall_time_s) << ',';
        if (r.peak_alloc_bytes >= 0) out << r.peak_alloc_bytes;
        out << '\n';
    }
}

} // namespace infodesign::optimize
