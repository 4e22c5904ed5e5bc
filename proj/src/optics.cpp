#include "infodesign/optics.hpp"

#include "infodesign/fft.hpp"
#include "infodesign/io.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace infodesign::optics {

namespace {

constexpr double kDegenerateSum = 1e-12;
using std::numbers::pi;

void check_square_pow2(const Eigen::Index rows, const Eigen::Index cols, const char* who) {
    if (rows != cols) throw ShapeError(std::string(who) + ": grid must be square");
    if (!is_pow2(static_cast<int>(rows)))
        throw SizingError(std::string(who) + ": side must be a power of two, got " +
                          std::to_string(rows));
}

ComplexField angular_transfer(int side, double z, double wavelength, double pitch) {
    ComplexField h(side, side);
    const double inv_l2 = 1.0 / (wavelength * wavelength);
    const double df = 1.0 / (side * pitch);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double fy = freq_index(r, side) * df;
            double fx = freq_index(c, side) * df;
            double arg = inv_l2 - fx * fx - fy * fy;
            if (arg < 0.0) {
                h(r, c) = 0.0; // evanescent: hard cutoff
            } else {
                double phase = 2.0 * pi * z * std::sqrt(arg);
                h(r, c) = std::complex<double>(std::cos(phase), std::sin(phase));
            }
        }
    return h;
}

struct HeightmapPipeline {
    ComplexField field;    // aperture * exp(i*phi), possibly embedded in padding
    ComplexField u;        // propagated field
    Image q;               // |u|^2
    double total = 0.0;    // sum of q
    int pad_offset = 0;
    int grid = 0;
};

HeightmapPipeline heightmap_forward(const HeightMapParams& params, int pad) {
    params.validate();
    if (pad < 1) throw SizingError("psf_from_heightmap: pad must be >= 1");
    const int side = params.side();
    const int grid = side * pad;
    check_square_pow2(grid, grid, "psf_from_heightmap");

    HeightmapPipeline p;
    p.grid = grid;
    p.pad_offset = (grid - side) / 2;
    Image phi = phase_from_height(params);
    p.field = ComplexField::Zero(grid, grid);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            p.field(p.pad_offset + r, p.pad_offset + c) =
                std::complex<double>(std::cos(phi(r, c)), std::sin(phi(r, c)));
    p.u = angular_spectrum_propagate(p.field, params.propagation_distance, params.wavelength,
                                     params.pixel_pitch);
    p.q = p.u.abs2();
    p.total = p.q.sum();
    return p;
}

double lenslet_density(const LensletPsfParams::Lenslet& l, double x, double y, double& t0,
                       double& t1) {
    double d0 = x - l.mean(0);
    double d1 = y - l.mean(1);
    t0 = d0 / l.l00;
    t1 = (d1 - l.l10 * t0) / l.l11;
    return std::exp(-0.5 * (t0 * t0 + t1 * t1)) / (2.0 * pi * l.l00 * l.l11);
}

} // namespace

void HeightMapParams::validate() const {
    if (heights.rows() < 1 || heights.rows() != heights.cols())
        throw ShapeError("height map must be square and nonempty");
    if (!heights.isFinite().all()) throw NumericalError("height map contains non-finite values");
    if (wavelength <= 0 || pixel_pitch <= 0 || propagation_distance < 0)
        throw DomainError("wavelength and pitch must be positive, distance nonnegative");
    if (h_max <= 0) throw DomainError("h_max must be positive");
}

void LensletPsfParams::validate() const {
    if (lenslets.empty()) throw SizingError("lenslet PSF needs at least one lenslet");
    if (side < 1) throw SizingError("lenslet sensor side must be positive");
    for (const auto& l : lenslets)
        if (!(l.l00 > 0.0) || !(l.l11 > 0.0))
            throw DomainError("lenslet Cholesky diagonal must stay positive");
}

Image phase_from_height(const HeightMapParams& params) {
    params.validate();
    return (2.0 * pi / params.wavelength) * params.delta_n * params.heights;
}

ComplexField angular_spectrum_propagate(const ComplexField& field, double z, double wavelength,
                                        double pitch) {
    check_square_pow2(field.rows(), field.cols(), "angular_spectrum_propagate");
    if (z < 0.0) throw DomainError("angular_spectrum_propagate: z must be nonnegative");
    if (wavelength <= 0.0 || pitch <= 0.0)
        throw DomainError("angular_spectrum_propagate: wavelength and pitch must be positive");
    const int side = static_cast<int>(field.rows());
    ComplexField h = angular_transfer(side, z, wavelength, pitch);
    return ifft2((fft2(field) * h).eval());
}

Psf psf_from_heightmap(const HeightMapParams& params, int pad) {
    HeightmapPipeline p = heightmap_forward(params, pad);
    if (!(p.total > kDegenerateSum))
        throw NumericalError("degenerate PSF: propagated energy vanished");
    Psf psf;
    psf.values = p.q / p.total;
    psf.normalization = p.total;
    return psf;
}

Psf psf_from_lenslets(const LensletPsfParams& params, int side) {
    params.validate();
    if (side < 1) throw SizingError("psf_from_lenslets: side must be positive");
    const double w = 1.0 / params.count();
    Image q = Image::Zero(side, side);
    for (const auto& l : params.lenslets) {
        double t0, t1;
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c)
                q(r, c) += w * lenslet_density(l, static_cast<double>(c), static_cast<double>(r),
                                               t0, t1);
    }
    double total = q.sum();
    if (!(total > kDegenerateSum))
        throw NumericalError("degenerate PSF: all lenslet mass falls outside the sensor");
    Psf psf;
    psf.values = q / total;
    psf.normalization = total;
    return psf;
}

Image image_formation(const Image& scene, const Psf& psf) {
    if (scene.rows() != psf.values.rows() || scene.cols() != psf.values.cols())
        throw ShapeError("image_formation: scene and PSF grids differ");
    return circular_convolve(scene, psf.values).max(0.0);
}

Image image_formation_psf_cotangent(const Image& scene, const Image& measurement_cotangent) {
    return circular_correlate(measurement_cotangent, scene);
}

Psf encoder_psf(const EncoderParams& params) {
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) return psf_from_heightmap(*hm, 1);
    const auto& ll = std::get<LensletPsfParams>(params);
    return psf_from_lenslets(ll, ll.side);
}

int encoder_grid_side(const EncoderParams& params) {
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) return hm->side();
    return std::get<LensletPsfParams>(params).side;
}

EncoderGrad psf_backward(const EncoderParams& params, const Image& psf_cotangent) {
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) {
        HeightmapPipeline p = heightmap_forward(*hm, 1);
        if (!(p.total > kDegenerateSum)) throw NumericalError("degenerate PSF in psf_backward");
        const Image psf = p.q / p.total;
        // normalization adjoint: d/dq of (q / sum q)
        const double inner = (psf_cotangent * psf).sum();
        Image g_q = (psf_cotangent - inner) / p.total;
        // |u|^2 adjoint
        ComplexField w_u = 2.0 * g_q.cast<std::complex<double>>() * p.u;
        // propagation adjoint: spectrum multiplied by conj(H)
        ComplexField h = angular_transfer(p.grid, hm->propagation_distance, hm->wavelength,
                                          hm->pixel_pitch);
        ComplexField w_field = ifft2((fft2(w_u) * h.conjugate()).eval());
        const int side = hm->side();
        const double phase_per_height = 2.0 * pi / hm->wavelength * hm->delta_n;
        HeightMapGrad g_h(side, side);
        const std::complex<double> i_unit(0.0, 1.0);
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                std::complex<double> v = p.field(p.pad_offset + r, p.pad_offset + c);
                std::complex<double> w = w_field(p.pad_offset + r, p.pad_offset + c);
                g_h(r, c) = phase_per_height * (std::conj(w) * (i_unit * v)).real();
            }
        return g_h;
    }

    const auto& ll = std::get<LensletPsfParams>(params);
    Psf psf = psf_from_lenslets(ll, ll.side);
    const double inner = (psf_cotangent * psf.values).sum();
    Image g_q = (psf_cotangent - inner) / psf.normalization;
    const double w_comp = 1.0 / ll.count();
    LensletGrad grad;
    grad.lenslets.resize(ll.lenslets.size());
    for (std::size_t k = 0; k < ll.lenslets.size(); ++k) {
        const auto& l = ll.lenslets[k];
        auto& g = grad.lenslets[k];
        for (int r = 0; r < ll.side; ++r)
            for (int c = 0; c < ll.side; ++c) {
                double t0, t1;
                double n = lenslet_density(l, c, r, t0, t1);
                double w = g_q(r, c) * w_comp * n;
                if (w == 0.0) continue;
                // s = L^{-T} t; d(log N)/d mu = s, d(log N)/dL = s t^T - diag(1/l00, 1/l11)
                double s1 = t1 / l.l11;
                double s0 = (t0 - l.l10 * s1) / l.l00;
                g.d_mean(0) += w * s0;
                g.d_mean(1) += w * s1;
                g.d_l00 += w * (s0 * t0 - 1.0 / l.l00);
                g.d_l10 += w * (s1 * t0);
                g.d_l11 += w * (s1 * t1 - 1.0 / l.l11);
            }
    }
    return grad;
}

EncoderGrad forward_vjp(const EncoderParams& params, const Image& scene, const Image& cotangent) {
    if (scene.rows() != cotangent.rows() || scene.cols() != cotangent.cols())
        throw ShapeError("forward_vjp: cotangent must match the measurement shape");
    Psf psf = encoder_psf(params);
    if (scene.rows() != psf.values.rows())
        throw ShapeError("forward_vjp: scene grid does not match the encoder grid");
    // clamp adjoint: zero where the raw convolution went negative
    Image raw = circular_convolve(scene, psf.values);
    Image masked = (raw > 0.0).select(cotangent, Image::Zero(raw.rows(), raw.cols()));
    Image psf_cot = circular_correlate(masked, scene);
    return psf_backward(params, psf_cot);
}

std::size_t param_count(const EncoderParams& params) {
    if (const auto* hm = std::get_if<HeightMapParams>(&params))
        return static_cast<std::size_t>(hm->heights.size());
    return std::get<LensletPsfParams>(params).lenslets.size() * 5;
}

Eigen::VectorXd to_vector(const EncoderParams& params) {
    Eigen::VectorXd v(param_count(params));
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) {
        const double scale = 1.0 / hm->h_max;
        Eigen::Index n = hm->heights.size();
        for (Eigen::Index i = 0; i < n; ++i) v(i) = hm->heights.data()[i] * scale;
        return v;
    }
    const auto& ll = std::get<LensletPsfParams>(params);
    for (std::size_t k = 0; k < ll.lenslets.size(); ++k) {
        const auto& l = ll.lenslets[k];
        v(5 * k + 0) = l.mean(0);
        v(5 * k + 1) = l.mean(1);
        v(5 * k + 2) = l.l00;
        v(5 * k + 3) = l.l10;
        v(5 * k + 4) = l.l11;
    }
    return v;
}

void set_from_vector(EncoderParams& params, const Eigen::VectorXd& v) {
    if (v.size() != static_cast<Eigen::Index>(param_count(params)))
        throw ShapeError("set_from_vector: length mismatch");
    if (auto* hm = std::get_if<HeightMapParams>(&params)) {
        for (Eigen::Index i = 0; i < hm->heights.size(); ++i)
            hm->heights.data()[i] = v(i) * hm->h_max;
        return;
    }
    auto& ll = std::get<LensletPsfParams>(params);
    for (std::size_t k = 0; k < ll.lenslets.size(); ++k) {
        auto& l = ll.lenslets[k];
        l.mean(0) = v(5 * k + 0);
        l.mean(1) = v(5 * k + 1);
        l.l00 = v(5 * k + 2);
        l.l10 = v(5 * k + 3);
        l.l11 = v(5 * k + 4);
    }
}

Eigen::VectorXd grad_to_vector(const EncoderParams& params, const EncoderGrad& grad) {
    Eigen::VectorXd v(param_count(params));
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) {
        const auto& g = std::get<HeightMapGrad>(grad);
        for (Eigen::Index i = 0; i < g.size(); ++i) v(i) = g.data()[i] * hm->h_max;
        return v;
    }
    const auto& g = std::get<LensletGrad>(grad);
    for (std::size_t k = 0; k < g.lenslets.size(); ++k) {
        const auto& l = g.lenslets[k];
        v(5 * k + 0) = l.d_mean(0);
        v(5 * k + 1) = l.d_mean(1);
        v(5 * k + 2) = l.d_l00;
        v(5 * k + 3) = l.d_l10;
        v(5 * k + 4) = l.d_l11;
    }
    return v;
}

void project(EncoderParams& params) {
    if (auto* hm = std::get_if<HeightMapParams>(&params)) {
        hm->heights = hm->heights.min(hm->h_max).max(0.0);
        return;
    }
    auto& ll = std::get<LensletPsfParams>(params);
    const double hi = static_cast<double>(ll.side - 1);
    for (auto& l : ll.lenslets) {
        l.mean(0) = std::clamp(l.mean(0), 0.0, hi);
        l.mean(1) = std::clamp(l.mean(1), 0.0, hi);
        l.l00 = std::max(l.l00, ll.diag_floor);
        l.l11 = std::max(l.l11, ll.diag_floor);
    }
}

namespace {
constexpr std::uint8_t kKindHeightmap = 2;
constexpr std::uint8_t kKindLenslet = 3;
} // namespace

void save_encoder(const std::string& path, const EncoderParams& params) {
    io::BinWriter w(path);
    w.bytes("IDIO", 4);
    w.u32(1); // version
    if (const auto* hm = std::get_if<HeightMapParams>(&params)) {
        w.u8(kKindHeightmap);
        w.u32(static_cast<std::uint32_t>(hm->side()));
        w.u32(0);
        for (int r = 0; r < hm->side(); ++r)
            for (int c = 0; c < hm->side(); ++c) w.f64(hm->heights(r, c));
        w.f64(hm->pixel_pitch);
        w.f64(hm->wavelength);
        w.f64(hm->delta_n);
        w.f64(hm->propagation_distance);
        w.f64(hm->h_max);
        return;
    }
    const auto& ll = std::get<LensletPsfParams>(params);
    w.u8(kKindLenslet);
    w.u32(static_cast<std::uint32_t>(ll.side));
    w.u32(static_cast<std::uint32_t>(ll.count()));
    for (const auto& l : ll.lenslets) {
        w.f64(l.mean(0));
        w.f64(l.mean(1));
        w.f64(l.l00);
        w.f64(l.l10);
        w.f64(l.l11);
    }
    w.f64(ll.diag_floor);
}

EncoderParams load_encoder(const std::string& path) {
    io::BinReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "IDIO") throw ParseError(path + ": bad container magic");
    std::uint32_t version = r.u32();
    if (version != 1) throw ParseError(path + ": unsupported container version");
    std::uint8_t kind = r.u8();
    std::uint32_t dim = r.u32();
    std::uint32_t k = r.u32();
    if (kind == kKindHeightmap) {
        HeightMapParams hm;
        hm.heights.resize(dim, dim);
        for (std::uint32_t rr = 0; rr < dim; ++rr)
            for (std::uint32_t cc = 0; cc < dim; ++cc) hm.heights(rr, cc) = r.f64();
        hm.pixel_pitch = r.f64();
        hm.wavelength = r.f64();
        hm.delta_n = r.f64();
        hm.propagation_distance = r.f64();
        hm.h_max = r.f64();
        return hm;
    }
    if (kind == kKindLenslet) {
        LensletPsfParams ll;
        ll.side = static_cast<int>(dim);
        ll.lenslets.resize(k);
        for (auto& l : ll.lenslets) {
            l.mean(0) = r.f64();
            l.mean(1) = r.f64();
            l.l00 = r.f64();
            l.l10 = r.f64();
            l.l11 = r.f64();
        }
        ll.diag_floor = r.f64();
        return ll;
    }
    throw ParseError(path + ": not an encoder container (kind " + std::to_string(kind) + ")");
}

} // namespace infodesign::optics
