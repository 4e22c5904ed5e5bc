#include "infodesign/bench.hpp"

#include "infodesign/io.hpp"
#include "infodesign/memhook.hpp"
#include "infodesign/rng.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace infodesign::bench {

const char* mode_name(optimize::Mode mode) {
    return mode == optimize::Mode::Ideal ? "ideal" : "ideal_io";
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LineFit f;
    double denom = n * sxx - sx * sx;
    f.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

optics::EncoderParams bench_encoder(int side, std::uint64_t seed) {
    optics::HeightMapParams hm;
    hm.heights.resize(side, side);
    SeqRng rng(derive_seed(seed, "bench_init"));
    for (Eigen::Index i = 0; i < hm.heights.size(); ++i)
        hm.heights.data()[i] = rng.uniform() * 0.5 * hm.h_max;
    return hm;
}

} // namespace

ScalingReport bench_scaling(const std::vector<int>& patch_sides, int trials, int steps_per_trial,
                            const BenchSetup& setup) {
    if (patch_sides.empty()) throw SizingError("bench_scaling: no patch sides given");
    if (trials < 1) throw SizingError("bench_scaling: trials must be >= 1");
    if (steps_per_trial < 2)
        throw SizingError("bench_scaling: steps_per_trial must be >= 2 (one warm-up step)");
    for (int p : patch_sides)
        if (p < 2 || p > setup.scene_side)
            throw SizingError("bench_scaling: patch side " + std::to_string(p) +
                              " is not runnable on a " + std::to_string(setup.scene_side) +
                              " scene grid");

    ScalingReport report;
    for (optimize::Mode mode : setup.modes) {
        for (int p : patch_sides) {
            std::vector<double> times;
            std::vector<double> peaks;
            bool mem_ok = memhook::available();
            for (int trial = 0; trial < trials; ++trial) {
                std::uint64_t trial_seed =
                    derive_seed(setup.base.seed, "bench_trial",
                                static_cast<std::uint64_t>(trial) * 1000 + static_cast<std::uint64_t>(p));
                scenes::SceneDataset ds = scenes::gen_correlated_field(
                    setup.scene_count, setup.scene_side, setup.spectral_exponent, trial_seed);
                optimize::OptConfig cfg = setup.base;
                cfg.mode = mode;
                cfg.steps = steps_per_trial;
                cfg.patch_side = p;
                cfg.train_patch_count = 5 * p * p;
                cfg.test_patch_count = std::max(16, p * p / 2);
                cfg.seed = trial_seed;
                optimize::RunResult res =
                    optimize::run(ds, bench_encoder(setup.scene_side, trial_seed), setup.noise, cfg);
                if (res.aborted_at)
                    throw NumericalError("bench_scaling: optimization aborted at step " +
                                         std::to_string(*res.aborted_at));
                for (const optimize::StepRecord& r : res.trace) {
                    if (r.step == 0) continue; // warm-up: FFT plans, allocator pools
                    times.push_back(r.wall_time_s);
                    if (r.peak_alloc_bytes < 0)
                        mem_ok = false;
                    else
                        peaks.push_back(static_cast<double>(r.peak_alloc_bytes));
                }
            }
            ScalingRow row;
            row.mode = mode_name(mode);
            row.patch_side = p;
            row.patch_pixels = p * p;
            row.trials = trials;
            row.mean_step_time_s = pairwise_mean(times);
            double var = 0.0;
            for (double t : times) var += (t - row.mean_step_time_s) * (t - row.mean_step_time_s);
            row.std_step_time_s = times.size() > 1 ? std::sqrt(var / (times.size() - 1)) : 0.0;
            if (mem_ok && !peaks.empty()) row.mean_peak_alloc_bytes = pairwise_mean(peaks);
            report.rows.push_back(std::move(row));
        }
    }

    if (patch_sides.size() >= 4) {
        for (optimize::Mode mode : setup.modes) {
            ModeSlopes s;
            s.mode = mode_name(mode);
            std::vector<double> px, t, mem;
            bool mem_ok = true;
            for (const ScalingRow& row : report.rows) {
                if (row.mode != s.mode) continue;
                px.push_back(static_cast<double>(row.patch_pixels));
                t.push_back(row.mean_step_time_s);
                if (row.mean_peak_alloc_bytes)
                    mem.push_back(*row.mean_peak_alloc_bytes);
                else
                    mem_ok = false;
            }
            s.time_slope_s_per_px = least_squares(px, t).slope;
            s.time_per_100px_s = 100.0 * s.time_slope_s_per_px;
            if (mem_ok) {
                double mslope = least_squares(px, mem).slope;
                s.mem_slope_bytes_per_px = mslope;
                s.pixels_per_gb = mslope > 0.0
                                      ? static_cast<double>(1ull << 30) / mslope
                                      : std::numeric_limits<double>::infinity();
            }
            report.slopes.push_back(std::move(s));
        }
    }
    return report;
}

void write_scaling_csv(const std::string& path, const ScalingReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out << "mode,patch_side,patch_pixels,mean_step_time_s,std_step_time_s,mean_peak_alloc_bytes,"
           "trials\n";
    for (const ScalingRow& r : report.rows) {
        out << r.mode << ',' << r.patch_side << ',' << r.patch_pixels << ','
            << io::fmt_double(r.mean_step_time_s) << ',' << io::fmt_double(r.std_step_time_s)
            << ',';
        if (r.mean_peak_alloc_bytes) out << io::fmt_double(*r.mean_peak_alloc_bytes);
        out << ',' << r.trials << '\n';
    }
}

void write_slopes_csv(const std::string& path, const ScalingReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out << "mode,time_per_100px_s,pixels_per_GB\n";
    for (const ModeSlopes& s : report.slopes) {
        out << s.mode << ',' << io::fmt_double(s.time_per_100px_s) << ',';
        if (s.pixels_per_gb) out << io::fmt_double(*s.pixels_per_gb);
        out << '\n';
    }
}

std::string summary_table(const ScalingReport& report) {
    std::ostringstream out;
    out << "mode      side  pixels  step_time_s (std)      peak_alloc\n";
    char buf[160];
    for (const ScalingRow& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%-9s %4d  %6d  %.6f (%.6f)  ", r.mode.c_str(),
                      r.patch_side, r.patch_pixels, r.mean_step_time_s, r.std_step_time_s);
        out << buf;
        if (r.mean_peak_alloc_bytes)
            out << static_cast<long long>(*r.mean_peak_alloc_bytes) << " B";
        else
            out << "n/a";
        out << '\n';
    }
    for (const ModeSlopes& s : report.slopes) {
        out << s.mode << ": +100 px costs " << io::fmt_double(s.time_per_100px_s) << " s/step";
        if (s.pixels_per_gb)
            out << ", " << io::fmt_double(*s.pixels_per_gb) << " px per +1 GiB";
        out << '\n';
    }
    return out.str();
}

} // namespace infodesign::bench
