#include "infodesign/mi.hpp"

#include "infodesign/fft.hpp"
#include "infodesign/rng.hpp"

#include <algorithm>
#include <cmath>

namespace infodesign::mi {

namespace {

Eigen::VectorXd flatten_patch(const Image& img, int r0, int c0, int p) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(p) * p);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) v(static_cast<Eigen::Index>(r) * p + c) = img(r0 + r, c0 + c);
    return v;
}

Image patch_row_to_image(const Eigen::MatrixXd& patches, Eigen::Index i, int p) {
    Image img(p, p);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) img(r, c) = patches(i, static_cast<Eigen::Index>(r) * p + c);
    return img;
}

Eigen::VectorXd image_to_patch_vec(const Image& img) {
    const int p = static_cast<int>(img.rows());
    Eigen::VectorXd v(static_cast<Eigen::Index>(p) * img.cols());
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < img.cols(); ++c) v(static_cast<Eigen::Index>(r) * img.cols() + c) = img(r, c);
    return v;
}

} // namespace

std::pair<density::PatchBatch, std::vector<PatchIndex>> extract_patches_indexed(
    const std::vector<Image>& measurements, int patch_side, int count, std::uint64_t seed) {
    if (measurements.empty()) throw SizingError("extract_patches: no measurements");
    if (count < 1) throw SizingError("extract_patches: count must be positive");
    const int rows = static_cast<int>(measurements[0].rows());
    const int cols = static_cast<int>(measurements[0].cols());
    if (patch_side < 1 || patch_side > rows || patch_side > cols)
        throw SizingError("extract_patches: patch side " + std::to_string(patch_side) +
                          " exceeds measurement side " + std::to_string(std::min(rows, cols)));
    for (const Image& m : measurements)
        if (m.rows() != rows || m.cols() != cols)
            throw ShapeError("extract_patches: measurements differ in shape");

    const std::int64_t off_r = rows - patch_side + 1;
    const std::int64_t off_c = cols - patch_side + 1;
    const std::int64_t per_image = off_r * off_c;
    const std::int64_t total = per_image * static_cast<std::int64_t>(measurements.size());

    SeqRng rng(derive_seed(seed, "patch_offsets"));
    std::vector<std::int64_t> ids(static_cast<std::size_t>(total));
    std::vector<PatchIndex> records;
    records.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(records.size()) < count) {
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
        rng.shuffle(ids);
        for (std::int64_t id : ids) {
            if (static_cast<int>(records.size()) >= count) break;
            PatchIndex rec;
            rec.image = static_cast<int>(id / per_image);
            std::int64_t off = id % per_image;
            rec.row = static_cast<int>(off / off_c);
            rec.col = static_cast<int>(off % off_c);
            records.push_back(rec);
        }
    }

    density::PatchBatch batch;
    batch.patch_side = patch_side;
    batch.patches.resize(count, static_cast<Eigen::Index>(patch_side) * patch_side);
    for (int i = 0; i < count; ++i) {
        const PatchIndex& rec = records[static_cast<std::size_t>(i)];
        batch.patches.row(i) =
            flatten_patch(measurements[static_cast<std::size_t>(rec.image)], rec.row, rec.col,
                          patch_side)
                .transpose();
    }
    return {std::move(batch), std::move(records)};
}

density::PatchBatch extract_patches(const std::vector<Image>& measurements, int patch_side,
                                    int count, std::uint64_t seed) {
    return extract_patches_indexed(measurements, patch_side, count, seed).first;
}

MiEstimate estimate_mi(const density::DensityModel& model, const noise::NoiseModel& noise_model,
                       const density::PatchBatch& noiseless_test, std::uint64_t seed) {
    noiseless_test.validate();
    if (noiseless_test.count() == 0) throw SizingError("estimate_mi: empty test batch");
    if (density::model_dim(model) != noiseless_test.dim())
        throw ShapeError("estimate_mi: model dim does not match patch length");

    const int p = noiseless_test.patch_side;
    const Eigen::Index m = noiseless_test.count();
    std::vector<double> logp(static_cast<std::size_t>(m));
    std::vector<double> cond(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        Image x = patch_row_to_image(noiseless_test.patches, static_cast<Eigen::Index>(i), p);
        Image y = noise::sample(noise_model, x, derive_seed(seed, "estimate_noise", i));
        logp[i] = density::log_prob(model, image_to_patch_vec(y));
        cond[i] = noise::conditional_entropy(noise_model, x);
    });

    MiEstimate est;
    est.m_test = m;
    est.h_y = -pairwise_mean(logp) / kLn2;
    est.h_y_given_x = pairwise_mean(cond);
    est.mi_total = est.h_y - est.h_y_given_x;
    est.mi_per_pixel = est.mi_total / static_cast<double>(p * p);
    return est;
}

SimulatedBatch simulate_batch(const optics::EncoderParams& params,
                              const noise::NoiseModel& noise_model,
                              const scenes::SceneDataset& dataset, int patch_side, int count,
                              std::uint64_t seed) {
    if (dataset.images.empty()) throw SizingError("simulate_batch: empty scene dataset");
    SimulatedBatch b;
    b.seed = seed;
    b.psf = optics::encoder_psf(params);
    if (b.psf.values.rows() != dataset.side)
        throw ShapeError("simulate_batch: encoder grid (" +
                         std::to_string(b.psf.values.rows()) + ") does not match scene side (" +
                         std::to_string(dataset.side) + ")");
    b.raw.resize(dataset.images.size());
    b.noiseless.resize(dataset.images.size());
    b.noisy.resize(dataset.images.size());
    parallel_for(dataset.images.size(), [&](std::size_t i) {
        b.raw[i] = circular_convolve(dataset.images[i], b.psf.values);
        b.noiseless[i] = b.raw[i].max(0.0);
        b.noisy[i] = noise::sample(noise_model, b.noiseless[i], derive_seed(seed, "noise", i));
    });
    auto [y_patches, records] = extract_patches_indexed(b.noisy, patch_side, count,
                                                        derive_seed(seed, "patches"));
    b.y_patches = std::move(y_patches);
    b.records = std::move(records);
    b.x_patches.patch_side = patch_side;
    b.x_patches.patches.resize(b.y_patches.count(), b.y_patches.dim());
    for (Eigen::Index i = 0; i < b.y_patches.count(); ++i) {
        const PatchIndex& rec = b.records[static_cast<std::size_t>(i)];
        b.x_patches.patches.row(i) =
            flatten_patch(b.noiseless[static_cast<std::size_t>(rec.image)], rec.row, rec.col,
                          patch_side)
                .transpose();
    }
    return b;
}

Image batch_psf_cotangent(const noise::NoiseModel& noise_model,
                          const scenes::SceneDataset& dataset, const SimulatedBatch& batch,
                          const Eigen::MatrixXd& y_patch_cotangent, double centropy_scale) {
    const int p = batch.y_patches.patch_side;
    const int side = dataset.side;
    const std::size_t n_img = batch.noiseless.size();
    if (y_patch_cotangent.size() > 0 &&
        (y_patch_cotangent.rows() != batch.y_patches.count() ||
         y_patch_cotangent.cols() != batch.y_patches.dim()))
        throw ShapeError("batch_psf_cotangent: cotangent shape mismatch");

    std::vector<Image> y_cot(n_img, Image::Zero(side, side));
    if (y_patch_cotangent.size() > 0) {
        for (Eigen::Index i = 0; i < batch.y_patches.count(); ++i) {
            const PatchIndex& rec = batch.records[static_cast<std::size_t>(i)];
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c)
                    y_cot[static_cast<std::size_t>(rec.image)](rec.row + r, rec.col + c) +=
                        y_patch_cotangent(i, static_cast<Eigen::Index>(r) * p + c);
        }
    }

    Image psf_cot = Image::Zero(side, side);
    for (std::size_t img = 0; img < n_img; ++img) {
        // chain through the reparameterized noise draw
        Image x_cot = y_cot[img] * noise::sample_jacobian(noise_model, batch.noiseless[img],
                                                          derive_seed(batch.seed, "noise", img));
        if (centropy_scale != 0.0) {
            Image frame_grad =
                centropy_scale * noise::conditional_entropy_grad(noise_model, batch.noiseless[img]);
            for (Eigen::Index i = 0; i < batch.y_patches.count(); ++i) {
                const PatchIndex& rec = batch.records[static_cast<std::size_t>(i)];
                if (static_cast<std::size_t>(rec.image) != img) continue;
                for (int r = 0; r < p; ++r)
                    for (int c = 0; c < p; ++c)
                        x_cot(rec.row + r, rec.col + c) += frame_grad(rec.row + r, rec.col + c);
            }
        }
        // clamp adjoint, then convolution adjoint
        x_cot = (batch.raw[img] > 0.0).select(x_cot, Image::Zero(side, side));
        psf_cot += circular_correlate(x_cot, dataset.images[img]);
    }
    return psf_cot;
}

LossGrad mi_loss_grad(const optics::EncoderParams& params, const density::DensityModel& model,
                      const noise::NoiseModel& noise_model, const scenes::SceneDataset& dataset,
                      int patch_side, int patch_count, std::uint64_t seed) {
    if (!density::model_fitted(model))
        throw StateError("mi_loss_grad: density model has not been fitted");
    if (density::model_dim(model) != static_cast<Eigen::Index>(patch_side) * patch_side)
        throw ShapeError("mi_loss_grad: model dim does not match patch_side^2");

    SimulatedBatch batch = simulate_batch(params, noise_model, dataset, patch_side, patch_count,
                                          seed);
    const Eigen::Index m = batch.y_patches.count();
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<double> logp(static_cast<std::size_t>(m));
    std::vector<double> cond(static_cast<std::size_t>(m));
    Eigen::MatrixXd y_cot(m, batch.y_patches.dim());
    const int p = patch_side;
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        Eigen::Index ii = static_cast<Eigen::Index>(i);
        Eigen::VectorXd y = batch.y_patches.patches.row(ii).transpose();
        logp[i] = density::log_prob(model, y);
        // loss = h_ygx - h_y, so d loss / d ln p_i = + 1/(m ln 2)
        y_cot.row(ii) = (inv_m / kLn2) * density::log_prob_grad_y(model, y).transpose();
        Image x = patch_row_to_image(batch.x_patches.patches, ii, p);
        cond[i] = noise::conditional_entropy(noise_model, x);
    });

    LossGrad out;
    out.h_y = -pairwise_mean(logp) / kLn2;
    out.h_y_given_x = pairwise_mean(cond);
    out.loss_bits = out.h_y_given_x - out.h_y;
    Image psf_cot = batch_psf_cotangent(noise_model, dataset, batch, y_cot, inv_m);
    out.grad = optics::psf_backward(params, psf_cot);
    return out;
}

std::vector<ModelRank> compare_models(const std::vector<const density::DensityModel*>& models,
                                      const density::PatchBatch& test) {
    std::vector<ModelRank> ranks;
    ranks.reserve(models.size());
    for (std::size_t i = 0; i < models.size(); ++i)
        ranks.push_back({static_cast<int>(i), density::cross_entropy(*models[i], test)});
    std::stable_sort(ranks.begin(), ranks.end(), [](const ModelRank& a, const ModelRank& b) {
        return a.cross_entropy_bits < b.cross_entropy_bits;
    });
    return ranks;
}

} // namespace infodesign::mi
