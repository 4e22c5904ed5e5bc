#include "infodesign/optics.hpp"

#include "infodesign/fft.hpp"
#include "infodesign/rng.hpp"
#include "infodesign/scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace infodesign;
using optics::EncoderParams;
using optics::HeightMapParams;
using optics::LensletPsfParams;
using optics::Psf;

namespace {

constexpr double kPi = std::numbers::pi;

HeightMapParams flat_map(int side) {
    HeightMapParams hm;
    hm.heights = Image::Zero(side, side);
    return hm;
}

// Paraxial lens phase wrapped into the available height range.
HeightMapParams lens_map(int side, double focal) {
    HeightMapParams hm = flat_map(side);
    const double center = (side - 1) / 2.0;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double x = (c - center) * hm.pixel_pitch;
            double y = (r - center) * hm.pixel_pitch;
            double phi = -kPi * (x * x + y * y) / (hm.wavelength * focal);
            phi = std::fmod(phi, 2.0 * kPi);
            if (phi < 0) phi += 2.0 * kPi;
            hm.heights(r, c) = phi * hm.wavelength / (2.0 * kPi * hm.delta_n);
        }
    hm.propagation_distance = focal;
    return hm;
}

double peak_fraction(const Psf& psf) { return psf.values.maxCoeff() / psf.values.sum(); }

LensletPsfParams demo_lenslets(int side, int k, std::uint64_t seed) {
    LensletPsfParams ll;
    ll.side = side;
    SeqRng rng(seed);
    for (int i = 0; i < k; ++i) {
        LensletPsfParams::Lenslet l;
        l.mean = Eigen::Vector2d(side / 4.0 + rng.uniform() * side / 2.0,
                                 side / 4.0 + rng.uniform() * side / 2.0);
        l.l00 = 0.8 + rng.uniform();
        l.l10 = 0.4 * (rng.uniform() - 0.5);
        l.l11 = 0.8 + rng.uniform();
        ll.lenslets.push_back(l);
    }
    return ll;
}

} // namespace

TEST_CASE("phase_from_height closed form") {
    HeightMapParams hm = flat_map(8);
    CHECK((optics::phase_from_height(hm) == 0.0).all());

    hm.heights.setConstant(hm.wavelength / hm.delta_n);
    Image phi = optics::phase_from_height(hm);
    CHECK(phi(3, 5) == doctest::Approx(2.0 * kPi).epsilon(1e-12));

    hm.wavelength = 650e-9;
    hm.delta_n = 0.4599;
    hm.heights.setConstant(1e-6);
    phi = optics::phase_from_height(hm);
    CHECK(phi(0, 0) == doctest::Approx(4.445609).epsilon(1e-5));
}

TEST_CASE("angular spectrum propagation basics") {
    ComplexField field(16, 16);
    SeqRng rng(21);
    for (Eigen::Index i = 0; i < field.size(); ++i)
        field.data()[i] = std::complex<double>(rng.normal(), rng.normal());

    SUBCASE("z = 0 is the identity") {
        ComplexField out = optics::angular_spectrum_propagate(field, 0.0, 650e-9, 1e-6);
        CHECK((out - field).abs().maxCoeff() / field.abs().maxCoeff() < 1e-12);
    }
    SUBCASE("plane waves stay uniform in modulus") {
        ComplexField plane = ComplexField::Constant(16, 16, std::complex<double>(0.7, -0.2));
        ComplexField out = optics::angular_spectrum_propagate(plane, 123e-6, 650e-9, 1e-6);
        Image mag = out.abs();
        CHECK(mag.maxCoeff() - mag.minCoeff() < 1e-9);
        CHECK(mag(0, 0) == doctest::Approx(std::abs(std::complex<double>(0.7, -0.2))).epsilon(1e-9));
    }
    SUBCASE("energy is conserved without evanescent cutoff") {
        // 1/(2*pitch) * sqrt(2) = 7.1e5 < 1/lambda = 1.5e6: all propagating
        double before = field.abs2().sum();
        ComplexField out = optics::angular_spectrum_propagate(field, 5e-4, 650e-9, 1e-6);
        CHECK(out.abs2().sum() == doctest::Approx(before).epsilon(1e-6));
    }
    SUBCASE("a quadratic-phase lens concentrates energy") {
        const int side = 32;
        const double focal = 1e-4;
        ComplexField lens(side, side);
        const double center = (side - 1) / 2.0;
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                double x = (c - center) * 1e-6, y = (r - center) * 1e-6;
                double phi = -kPi * (x * x + y * y) / (650e-9 * focal);
                lens(r, c) = std::complex<double>(std::cos(phi), std::sin(phi));
            }
        ComplexField out = optics::angular_spectrum_propagate(lens, focal, 650e-9, 1e-6);
        double in_peak = lens.abs2().maxCoeff() / lens.abs2().sum();
        double out_peak = out.abs2().maxCoeff() / out.abs2().sum();
        CHECK(out_peak >= 10.0 * in_peak);
    }
    SUBCASE("negative distance is rejected") {
        CHECK_THROWS_AS(optics::angular_spectrum_propagate(field, -1e-6, 650e-9, 1e-6), DomainError);
    }
}

TEST_CASE("heightmap PSF: symmetry, zone plate gain, normalization") {
    SUBCASE("flat map with a small aperture diffracts symmetrically") {
        HeightMapParams hm = flat_map(8);
        Psf psf = optics::psf_from_heightmap(hm, 4); // 8x8 aperture in a 32x32 grid
        const int n = 32;
        double asym = 0.0;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                asym = std::max(asym, std::abs(psf.values(r, c) - psf.values(n - 1 - r, n - 1 - c)));
        CHECK(asym < 1e-6);
        CHECK(psf.values.sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("zone plate focuses at least 10x better than a flat map") {
        Psf flat = optics::psf_from_heightmap(flat_map(32), 1);
        Psf lens = optics::psf_from_heightmap(lens_map(32, 1e-4), 1);
        CHECK(peak_fraction(lens) >= 10.0 * peak_fraction(flat));
        CHECK(lens.values.sum() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK((lens.values >= 0.0).all());
    }
}

TEST_CASE("lenslet PSF: mode, symmetry, normalization, degenerate error") {
    SUBCASE("single blob peaks at its mean") {
        LensletPsfParams ll;
        ll.side = 32;
        ll.lenslets.push_back({Eigen::Vector2d(16.0, 16.0), 0.5, 0.0, 0.5});
        Psf psf = optics::psf_from_lenslets(ll, 32);
        Eigen::Index r, c;
        psf.values.maxCoeff(&r, &c);
        CHECK(r == 16);
        CHECK(c == 16);
    }
    SUBCASE("mirrored means produce a horizontally symmetric PSF") {
        LensletPsfParams ll;
        ll.side = 32;
        ll.lenslets.push_back({Eigen::Vector2d(15.5 - 4.0, 15.5), 1.0, 0.0, 1.0});
        ll.lenslets.push_back({Eigen::Vector2d(15.5 + 4.0, 15.5), 1.0, 0.0, 1.0});
        Psf psf = optics::psf_from_lenslets(ll, 32);
        double asym = 0.0;
        for (int r = 0; r < 32; ++r)
            for (int c = 0; c < 32; ++c)
                asym = std::max(asym, std::abs(psf.values(r, c) - psf.values(r, 31 - c)));
        CHECK(asym < 1e-9);
    }
    SUBCASE("random mixture is normalized") {
        Psf psf = optics::psf_from_lenslets(demo_lenslets(32, 3, 5), 32);
        CHECK(psf.values.sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("mass entirely off the sensor is an error") {
        LensletPsfParams ll;
        ll.side = 32;
        ll.lenslets.push_back({Eigen::Vector2d(1e4, 1e4), 0.1, 0.0, 0.1});
        CHECK_THROWS_AS(optics::psf_from_lenslets(ll, 32), NumericalError);
    }
}

TEST_CASE("image formation: identity kernel, impulse response, DC preservation") {
    scenes::SceneDataset ds = scenes::gen_correlated_field(1, 32, 1.0, 2);
    const Image& scene = ds.images[0];

    Psf delta;
    delta.values = Image::Zero(32, 32);
    delta.values(0, 0) = 1.0;
    Image out = optics::image_formation(scene, delta);
    CHECK((out - scene).abs().maxCoeff() < 1e-9);

    Image impulse = Image::Zero(32, 32);
    impulse(0, 0) = 1.0;
    Psf psf = optics::psf_from_lenslets(demo_lenslets(32, 2, 7), 32);
    Image resp = optics::image_formation(impulse, psf);
    CHECK((resp - psf.values).abs().maxCoeff() < 1e-9);

    Image flat = Image::Constant(32, 32, 0.37);
    Image dc = optics::image_formation(flat, psf);
    CHECK((dc - 0.37).abs().maxCoeff() < 1e-9);

    CHECK_THROWS_AS(optics::image_formation(Image::Zero(16, 16), psf), ShapeError);
}

namespace {

// <J u, v> via Richardson-extrapolated central differences of the forward map.
double directional_derivative_dot(const EncoderParams& params, const Image& scene,
                                  const Eigen::VectorXd& u, const Image& v) {
    auto forward = [&](double h) {
        EncoderParams p = params;
        Eigen::VectorXd theta = optics::to_vector(p);
        optics::set_from_vector(p, theta + h * u);
        Image xp = optics::image_formation(scene, optics::encoder_psf(p));
        optics::set_from_vector(p, theta - h * u);
        Image xm = optics::image_formation(scene, optics::encoder_psf(p));
        return ((xp - xm) / (2.0 * h)).eval();
    };
    Image d1 = forward(1e-4);
    Image d2 = forward(5e-5);
    Image d = (4.0 * d2 - d1) / 3.0;
    return (d * v).sum();
}

} // namespace

TEST_CASE("forward VJP agrees with the probed Jacobian adjoint") {
    scenes::SceneDataset ds = scenes::gen_correlated_field(1, 16, 1.5, 3);
    const Image& scene = ds.images[0];
    SeqRng rng(31);

    SUBCASE("height map") {
        HeightMapParams hm = flat_map(16);
        for (Eigen::Index i = 0; i < hm.heights.size(); ++i)
            hm.heights.data()[i] = rng.uniform() * hm.h_max * 0.8;
        EncoderParams params = hm;
        Eigen::VectorXd u(optics::param_count(params));
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
        Image v(16, 16);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
        double lhs = directional_derivative_dot(params, scene, u, v);
        double rhs = optics::grad_to_vector(params, optics::forward_vjp(params, scene, v)).dot(u);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
    SUBCASE("lenslets") {
        EncoderParams params = demo_lenslets(16, 2, 13);
        Eigen::VectorXd u(optics::param_count(params));
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
        Image v(16, 16);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
        double lhs = directional_derivative_dot(params, scene, u, v);
        double rhs = optics::grad_to_vector(params, optics::forward_vjp(params, scene, v)).dot(u);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
    SUBCASE("zero cotangent gives a zero gradient") {
        EncoderParams params = demo_lenslets(16, 2, 17);
        Eigen::VectorXd g = optics::grad_to_vector(
            params, optics::forward_vjp(params, scene, Image::Zero(16, 16)));
        CHECK(g.norm() == 0.0);
    }
}

TEST_CASE("projection enforces the parameter invariants") {
    HeightMapParams hm = flat_map(4);
    hm.heights(0, 0) = -1.0;
    hm.heights(1, 1) = 10.0 * hm.h_max;
    EncoderParams p = hm;
    optics::project(p);
    const auto& hm2 = std::get<HeightMapParams>(p);
    CHECK(hm2.heights(0, 0) == 0.0);
    CHECK(hm2.heights(1, 1) == hm2.h_max);

    LensletPsfParams ll = demo_lenslets(16, 1, 3);
    ll.lenslets[0].mean = Eigen::Vector2d(-5.0, 99.0);
    ll.lenslets[0].l00 = 1e-9;
    EncoderParams q = ll;
    optics::project(q);
    const auto& ll2 = std::get<LensletPsfParams>(q);
    CHECK(ll2.lenslets[0].mean(0) == 0.0);
    CHECK(ll2.lenslets[0].mean(1) == 15.0);
    CHECK(ll2.lenslets[0].l00 == ll2.diag_floor);
}

TEST_CASE("encoder containers round trip") {
    namespace fs = std::filesystem;
    std::string dir = (fs::temp_directory_path() / "infodesign_optics").string();
    fs::create_directories(dir);

    HeightMapParams hm = lens_map(8, 2e-4);
    optics::save_encoder(dir + "/hm.bin", hm);
    auto hm2 = std::get<HeightMapParams>(optics::load_encoder(dir + "/hm.bin"));
    CHECK((hm2.heights == hm.heights).all());
    CHECK(hm2.propagation_distance == hm.propagation_distance);

    LensletPsfParams ll = demo_lenslets(32, 3, 77);
    optics::save_encoder(dir + "/ll.bin", ll);
    auto ll2 = std::get<LensletPsfParams>(optics::load_encoder(dir + "/ll.bin"));
    REQUIRE(ll2.lenslets.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(ll2.lenslets[i].mean == ll.lenslets[i].mean);
        CHECK(ll2.lenslets[i].l10 == ll.lenslets[i].l10);
    }
}
