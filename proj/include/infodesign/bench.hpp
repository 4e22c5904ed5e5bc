#ifndef INFODESIGN_BENCH_HPP
#define INFODESIGN_BENCH_HPP

#include "infodesign/optimize.hpp"

#include <optional>
#include <string>
#include <vector>

namespace infodesign::bench {

// One (mode, patch size) cell: per-step wall time and peak transient heap
// allocation, pooled over steps (minus a warm-up step) and trials.
struct ScalingRow {
    std::string mode;
    int patch_side = 0;
    int patch_pixels = 0;
    double mean_step_time_s = 0.0;
    double std_step_time_s = 0.0;
    std::optional<double> mean_peak_alloc_bytes; // absent without the allocator hook
    int trials = 0;
};

struct ModeSlopes {
    std::string mode;
    // least-squares slope of step time vs patch pixels, scaled to +100 pixels
    double time_per_100px_s = 0.0;
    // patch pixels per +1 GiB of peak allocation (inverse memory slope);
    // +inf when the fitted slope is not positive
    std::optional<double> pixels_per_gb;
    double time_slope_s_per_px = 0.0;
    std::optional<double> mem_slope_bytes_per_px;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    std::vector<ModeSlopes> slopes; // empty with fewer than 4 patch sizes
};

struct BenchSetup {
    int scene_side = 64;
    int scene_count = 8;
    double spectral_exponent = 1.5;
    noise::NoiseModel noise = noise::Gaussian{0.05};
    std::vector<optimize::Mode> modes = {optimize::Mode::Ideal, optimize::Mode::IdealIo};
    optimize::OptConfig base; // patch_side/steps/mode/train counts overwritten per cell
};

// Runs `trials` fresh height-map optimizations per (mode, patch size) with a
// training set of 5x the patch pixel count, then fits runtime and memory
// lines against patch pixels.
ScalingReport bench_scaling(const std::vector<int>& patch_sides, int trials, int steps_per_trial,
                            const BenchSetup& setup);

void write_scaling_csv(const std::string& path, const ScalingReport& report);
void write_slopes_csv(const std::string& path, const ScalingReport& report);
std::string summary_table(const ScalingReport& report);

const char* mode_name(optimize::Mode mode);

} // namespace infodesign::bench

#endif
