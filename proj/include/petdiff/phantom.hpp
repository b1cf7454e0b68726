#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petdiff/rng.hpp"
#include "petdiff/volume.hpp"

namespace petdiff {

struct Ellipsoid {
    double cs = 0, cy = 0, cx = 0;  // center, voxel index units
    double rs = 1, ry = 1, rx = 1;  // semi-axes
    double activity = 0;            // additive emission level
};

// Hot sphere; contributes (contrast - 1) times the organ-plus-background
// level at its center, so the total inside is contrast times the local level.
struct Lesion {
    double cs = 0, cy = 0, cx = 0;
    double radius = 1;
    double contrast = 1;  // >= 1
};

struct PhantomSpec {
    int ns = 64, ny = 64, nx = 64;
    std::vector<Ellipsoid> organs;
    std::vector<Lesion> lesions;
    double background = 0.0;  // level outside every organ; 0 keeps air black
    uint64_t seed = 0;        // dose draw
    double dose_lo = 1.5e8, dose_hi = 3.5e8;  // injected-activity range, Bq
    std::string id;
};

// voxel = background + activities of the containing shapes; deterministic
// given the spec; meta.dose_bq drawn from [dose_lo, dose_hi]
Volume3D generate_phantom(const PhantomSpec& spec);

// body ellipsoid at unit activity with a few organs and hot lesions inside
PhantomSpec random_phantom_spec(int dim, uint64_t seed, const std::string& id);

// Poisson thinning: per voxel lambda = value * events_per_unit * fraction,
// output = draw / (events_per_unit * fraction); unbiased, variance 1/fraction.
// meta.count_fraction = fraction and meta.dose_bq scales by fraction.
Volume3D simulate_low_count(const Volume3D& v, double fraction, double events_per_unit,
                            RandomStream& rng);

struct BuildDataConfig {
    int num_phantoms = 20;
    std::vector<double> fractions = {0.01, 0.02, 0.05, 0.10, 0.25, 0.50};
    int dim = 64;
    double events_per_unit = 250.0;
    double train_frac = 0.4, val_frac = 0.1;  // remainder is the test split
    uint64_t seed = 1;
    int threads = 0;  // 0 keeps the runtime default
};

// writes <id>_full.vol plus <id>_f<permille>.vol per fraction and a
// manifest.json the dataset loader accepts; returns the manifest path.
// Phantoms are independent jobs with streams derived from (seed, index).
std::string build_dataset(const std::string& out_dir, const BuildDataConfig& cfg);

}  // namespace petdiff
