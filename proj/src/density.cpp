#include "infodesign/density.hpp"

#include "infodesign/io.hpp"
#include "infodesign/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace infodesign::density {

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;

double log_gauss(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                 const Eigen::VectorXd& y) {
    Eigen::VectorXd t = chol.triangularView<Eigen::Lower>().solve(y - mean);
    return -0.5 * (static_cast<double>(mean.size()) * kLn2Pi + t.squaredNorm()) -
           chol.diagonal().array().log().sum();
}

Eigen::VectorXd log_gauss_grad(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                               const Eigen::VectorXd& y) {
    Eigen::VectorXd t = chol.triangularView<Eigen::Lower>().solve(y - mean);
    return -chol.transpose().triangularView<Eigen::Upper>().solve(t);
}

double logsumexp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

void check_dim(const DensityModel& model, Eigen::Index n) {
    if (!model_fitted(model)) throw StateError("density model has not been fitted");
    if (model_dim(model) != n)
        throw ShapeError("patch length " + std::to_string(n) + " does not match model dim " +
                         std::to_string(model_dim(model)));
}

} // namespace

void PatchBatch::validate() const {
    if (patch_side < 1) throw SizingError("patch_side must be positive");
    if (patches.cols() != static_cast<Eigen::Index>(patch_side) * patch_side)
        throw ShapeError("patch length does not equal patch_side^2");
}

Eigen::Index model_dim(const DensityModel& model) {
    if (const auto* g = std::get_if<GaussianModel>(&model)) return g->dim();
    return std::get<GmmModel>(model).dim();
}

bool model_fitted(const DensityModel& model) {
    if (const auto* g = std::get_if<GaussianModel>(&model)) return g->fitted;
    return std::get<GmmModel>(model).fitted;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError(
            "Cholesky factorization failed; increase lambda_reg to keep the covariance positive "
            "definite");
    return llt.matrixL();
}

double resolve_lambda_reg(const PatchBatch& train, std::optional<double> requested) {
    if (requested) {
        if (*requested < 0.0) throw DomainError("lambda_reg must be nonnegative");
        return *requested;
    }
    const Eigen::Index n = train.count();
    if (n < 2) return 1e-8;
    Eigen::RowVectorXd mean = train.patches.colwise().mean();
    double var = (train.patches.rowwise() - mean).squaredNorm() /
                 (static_cast<double>(n - 1) * static_cast<double>(train.dim()));
    return std::max(1e-4 * var, 1e-12);
}

GaussianModel fit_gaussian(const PatchBatch& train, double lambda_reg) {
    train.validate();
    if (train.count() < 2)
        throw SizingError("fit_gaussian needs at least 2 patches, got " +
                          std::to_string(train.count()));
    if (lambda_reg < 0.0) throw DomainError("lambda_reg must be nonnegative");

    const Eigen::Index n = train.count();
    const Eigen::Index d = train.dim();
    GaussianModel m;
    m.mean = train.patches.colwise().mean();
    Eigen::MatrixXd centered = train.patches.rowwise() - m.mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    cov.diagonal().array() += lambda_reg;
    m.chol = cholesky_lower(cov);
    m.lambda_reg = lambda_reg;
    m.fitted = true;
    (void)d;
    return m;
}

GmmModel fit_gmm_em(const PatchBatch& train, int k, int max_iters, double tol, double lambda_reg,
                    std::uint64_t seed) {
    train.validate();
    if (k < 1) throw SizingError("fit_gmm_em: K must be positive");
    const Eigen::Index n = train.count();
    const Eigen::Index d = train.dim();
    if (n < k)
        throw SizingError("fit_gmm_em: K=" + std::to_string(k) + " exceeds " + std::to_string(n) +
                          " training patches");
    if (k == 1) {
        GaussianModel g = fit_gaussian(train, lambda_reg);
        GmmModel m;
        m.components.push_back({1.0, g.mean, g.chol});
        m.lambda_reg = lambda_reg;
        m.fitted = true;
        m.train_ll.push_back(cross_entropy(DensityModel(g), train) * -kLn2);
        return m;
    }

    const Eigen::MatrixXd& y = train.patches;
    Eigen::RowVectorXd global_mean = y.colwise().mean();
    Eigen::MatrixXd centered = y.rowwise() - global_mean;
    Eigen::MatrixXd global_cov =
        (centered.transpose() * centered) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    global_cov.diagonal().array() += lambda_reg;
    Eigen::MatrixXd global_chol = cholesky_lower(global_cov);

    // Distance-weighted seeding: pick component means among the patches,
    // favoring points far from the centers already chosen.
    SeqRng rng(derive_seed(seed, "gmm_seed"));
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2 = (y.rowwise() - y.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        double total = d2.sum();
        Eigen::Index pick = 0;
        if (total <= 0.0) {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        } else {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        d2 = d2.cwiseMin((y.rowwise() - y.row(pick)).rowwise().squaredNorm());
    }

    GmmModel m;
    m.lambda_reg = lambda_reg;
    m.components.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        m.components[j].weight = 1.0 / k;
        m.components[j].mean = y.row(centers[j]).transpose();
        m.components[j].chol = global_chol;
    }

    Eigen::MatrixXd log_resp(n, k);
    Eigen::VectorXd patch_ll(n);
    int reseeds = 0;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        // E-step
        for (int j = 0; j < k; ++j) {
            const auto& c = m.components[static_cast<std::size_t>(j)];
            double lw = std::log(c.weight);
            for (Eigen::Index i = 0; i < n; ++i)
                log_resp(i, j) = lw + log_gauss(c.mean, c.chol, y.row(i).transpose());
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            double lse = logsumexp(log_resp.row(i).transpose());
            patch_ll(i) = lse;
            log_resp.row(i).array() -= lse;
        }
        double ll = patch_ll.mean();
        m.train_ll.push_back(ll);

        // M-step
        Eigen::MatrixXd resp = log_resp.array().exp();
        for (int j = 0; j < k; ++j) {
            double nk = resp.col(j).sum();
            if (nk < 1e-12) {
                if (++reseeds > 3)
                    throw NumericalError("fit_gmm_em: component kept collapsing after 3 reseeds");
                Eigen::Index worst;
                patch_ll.minCoeff(&worst);
                auto& c = m.components[static_cast<std::size_t>(j)];
                c.mean = y.row(worst).transpose();
                c.chol = global_chol;
                c.weight = 1.0 / static_cast<double>(n);
                continue;
            }
            auto& c = m.components[static_cast<std::size_t>(j)];
            c.weight = nk / static_cast<double>(n);
            c.mean = (resp.col(j).transpose() * y).transpose() / nk;
            Eigen::MatrixXd cd = y.rowwise() - c.mean.transpose();
            Eigen::MatrixXd cov = cd.transpose() * (resp.col(j).asDiagonal() * cd) / nk;
            cov.diagonal().array() += lambda_reg;
            c.chol = cholesky_lower(cov);
        }
        double wsum = 0.0;
        for (const auto& c : m.components) wsum += c.weight;
        for (auto& c : m.components) c.weight /= wsum;

        if (iter > 0 && std::abs(ll - prev_ll) < tol) break;
        prev_ll = ll;
    }
    m.fitted = true;
    (void)d;
    return m;
}

double log_prob(const DensityModel& model, const Eigen::VectorXd& patch) {
    check_dim(model, patch.size());
    if (const auto* g = std::get_if<GaussianModel>(&model))
        return log_gauss(g->mean, g->chol, patch);
    const auto& mm = std::get<GmmModel>(model);
    Eigen::VectorXd terms(static_cast<Eigen::Index>(mm.components.size()));
    for (std::size_t j = 0; j < mm.components.size(); ++j)
        terms(static_cast<Eigen::Index>(j)) =
            std::log(mm.components[j].weight) +
            log_gauss(mm.components[j].mean, mm.components[j].chol, patch);
    return logsumexp(terms);
}

Eigen::VectorXd log_prob_grad_y(const DensityModel& model, const Eigen::VectorXd& patch) {
    check_dim(model, patch.size());
    if (const auto* g = std::get_if<GaussianModel>(&model))
        return log_gauss_grad(g->mean, g->chol, patch);
    const auto& mm = std::get<GmmModel>(model);
    Eigen::VectorXd terms(static_cast<Eigen::Index>(mm.components.size()));
    for (std::size_t j = 0; j < mm.components.size(); ++j)
        terms(static_cast<Eigen::Index>(j)) =
            std::log(mm.components[j].weight) +
            log_gauss(mm.components[j].mean, mm.components[j].chol, patch);
    double lse = logsumexp(terms);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(patch.size());
    for (std::size_t j = 0; j < mm.components.size(); ++j) {
        double resp = std::exp(terms(static_cast<Eigen::Index>(j)) - lse);
        if (resp > 0.0)
            grad += resp * log_gauss_grad(mm.components[j].mean, mm.components[j].chol, patch);
    }
    return grad;
}

double gaussian_entropy_analytic(const GaussianModel& model) {
    if (!model.fitted) throw StateError("density model has not been fitted");
    return 0.5 * static_cast<double>(model.dim()) * kLog2TwoPiE +
           model.chol.diagonal().array().log().sum() / kLn2;
}

double cross_entropy(const DensityModel& model, const PatchBatch& test) {
    test.validate();
    if (test.count() == 0) throw SizingError("cross_entropy: empty test batch");
    check_dim(model, test.dim());
    std::vector<double> lp(static_cast<std::size_t>(test.count()));
    parallel_for(lp.size(), [&](std::size_t i) {
        lp[i] = log_prob(model, test.patches.row(static_cast<Eigen::Index>(i)).transpose());
    });
    return -pairwise_mean(lp) / kLn2;
}

Eigen::MatrixXd cholesky_reverse(const Eigen::MatrixXd& chol, Eigen::MatrixXd chol_cotangent) {
    const Eigen::Index n = chol.rows();
    Eigen::MatrixXd a_cot = Eigen::MatrixXd::Zero(n, n);
    // Reverse sweep of the column-by-column factorization; each assignment of
    // the forward algorithm is differentiated in reverse order.
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        const double ljj = chol(j, j);
        for (Eigen::Index i = n - 1; i > j; --i) {
            const double lb = chol_cotangent(i, j);
            if (lb == 0.0) continue;
            a_cot(i, j) += lb / ljj;
            for (Eigen::Index kk = 0; kk < j; ++kk) {
                chol_cotangent(i, kk) -= lb * chol(j, kk) / ljj;
                chol_cotangent(j, kk) -= lb * chol(i, kk) / ljj;
            }
            chol_cotangent(j, j) -= lb * chol(i, j) / ljj;
        }
        const double lb = chol_cotangent(j, j);
        a_cot(j, j) += lb / (2.0 * ljj);
        for (Eigen::Index kk = 0; kk < j; ++kk) chol_cotangent(j, kk) -= lb * chol(j, kk) / ljj;
    }
    return a_cot;
}

Eigen::MatrixXd fit_gaussian_differentiable(const PatchBatch& train, const PatchBatch& heldout,
                                            const Eigen::VectorXd& logp_cotangent,
                                            double lambda_reg) {
    train.validate();
    heldout.validate();
    if (train.count() < 2) throw SizingError("fit_gaussian_differentiable needs >= 2 train patches");
    if (train.dim() != heldout.dim())
        throw ShapeError("fit_gaussian_differentiable: train/heldout dims differ");
    if (logp_cotangent.size() != heldout.count())
        throw ShapeError("fit_gaussian_differentiable: cotangent length must equal heldout count");

    const Eigen::Index n = train.count();
    const Eigen::Index m = heldout.count();
    const double denom = static_cast<double>(n - 1);

    // Forward: fit and whiten the held-out patches.
    Eigen::VectorXd mean = train.patches.colwise().mean();
    Eigen::MatrixXd centered = train.patches.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    cov.diagonal().array() += lambda_reg;
    Eigen::MatrixXd chol = cholesky_lower(cov);
    Eigen::MatrixXd t = chol.triangularView<Eigen::Lower>().solve(
        (heldout.patches.rowwise() - mean.transpose()).transpose()); // d x m

    // Reverse. Per held-out patch z with weight w:
    //   log p = -0.5*||t||^2 - sum(log diag L) - const,  t = L^{-1}(z - mean)
    // so  t_bar = -w t,  r_bar = L^{-T} t_bar,  mean_bar += -r_bar,
    //     L_bar += tril(w (L^{-T} t) t^T) - w * diag(1/L_jj).
    const double wsum = logp_cotangent.sum();
    Eigen::MatrixXd tw = t * logp_cotangent.asDiagonal(); // d x m, column j scaled by w_j
    Eigen::MatrixXd lt_inv_tw =
        chol.transpose().triangularView<Eigen::Upper>().solve(tw); // L^{-T} T W
    Eigen::VectorXd mean_bar = lt_inv_tw.rowwise().sum();
    Eigen::MatrixXd chol_bar = (lt_inv_tw * t.transpose())
                                   .triangularView<Eigen::Lower>();
    chol_bar.diagonal() -= wsum * chol.diagonal().cwiseInverse();

    Eigen::MatrixXd cov_bar = cholesky_reverse(chol, std::move(chol_bar));

    // covariance: cov = centered^T centered / (n-1), lower triangle read only.
    Eigen::MatrixXd sym = cov_bar + cov_bar.transpose(); // diagonal correctly doubled
    Eigen::MatrixXd train_bar = centered * sym / denom;
    // centering: centered = Y - 1 mean^T, with mean also a function of Y.
    Eigen::RowVectorXd colsum = train_bar.colwise().sum();
    train_bar.rowwise() -= colsum / static_cast<double>(n);
    train_bar.rowwise() += mean_bar.transpose() / static_cast<double>(n);
    (void)m;
    return train_bar;
}

namespace {
constexpr std::uint8_t kKindGaussian = 0;
constexpr std::uint8_t kKindGmm = 1;
} // namespace

void save_model(const std::string& path, const DensityModel& model) {
    if (!model_fitted(model)) throw StateError("cannot serialize an unfitted model");
    io::BinWriter w(path);
    w.bytes("IDIO", 4);
    w.u32(1);
    if (const auto* g = std::get_if<GaussianModel>(&model)) {
        w.u8(kKindGaussian);
        w.u32(static_cast<std::uint32_t>(g->dim()));
        w.u32(0);
        for (Eigen::Index i = 0; i < g->dim(); ++i) w.f64(g->mean(i));
        for (Eigen::Index r = 0; r < g->dim(); ++r)
            for (Eigen::Index c = 0; c < g->dim(); ++c) w.f64(g->chol(r, c));
        w.f64(g->lambda_reg);
        return;
    }
    const auto& mm = std::get<GmmModel>(model);
    w.u8(kKindGmm);
    w.u32(static_cast<std::uint32_t>(mm.dim()));
    w.u32(static_cast<std::uint32_t>(mm.components.size()));
    for (const auto& c : mm.components) {
        w.f64(c.weight);
        for (Eigen::Index i = 0; i < c.mean.size(); ++i) w.f64(c.mean(i));
        for (Eigen::Index r = 0; r < c.chol.rows(); ++r)
            for (Eigen::Index cc = 0; cc < c.chol.cols(); ++cc) w.f64(c.chol(r, cc));
    }
    w.f64(mm.lambda_reg);
}

DensityModel load_model(const std::string& path) {
    io::BinReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "IDIO") throw ParseError(path + ": bad container magic");
    if (r.u32() != 1) throw ParseError(path + ": unsupported container version");
    std::uint8_t kind = r.u8();
    Eigen::Index dim = static_cast<Eigen::Index>(r.u32());
    std::uint32_t k = r.u32();
    if (kind == kKindGaussian) {
        GaussianModel g;
        g.mean.resize(dim);
        for (Eigen::Index i = 0; i < dim; ++i) g.mean(i) = r.f64();
        g.chol.resize(dim, dim);
        for (Eigen::Index rr = 0; rr < dim; ++rr)
            for (Eigen::Index cc = 0; cc < dim; ++cc) g.chol(rr, cc) = r.f64();
        g.lambda_reg = r.f64();
        g.fitted = true;
        return g;
    }
    if (kind == kKindGmm) {
        GmmModel mm;
        mm.components.resize(k);
        for (auto& c : mm.components) {
            c.weight = r.f64();
            c.mean.resize(dim);
            for (Eigen::Index i = 0; i < dim; ++i) c.mean(i) = r.f64();
            c.chol.resize(dim, dim);
            for (Eigen::Index rr = 0; rr < dim; ++rr)
                for (Eigen::Index cc = 0; cc < dim; ++cc) c.chol(rr, cc) = r.f64();
        }
        mm.lambda_reg = r.f64();
        mm.fitted = true;
        return mm;
    }
    throw ParseError(path + ": not a density container (kind " + std::to_string(kind) + ")");
}

} // namespace infodesign::density
