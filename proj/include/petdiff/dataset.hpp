#pragma once

#include <string>
#include <vector>

#include "petdiff/rng.hpp"
#include "petdiff/volume.hpp"

namespace petdiff {

// One study: a full-count volume plus low-count realizations at several
// count fractions. All volumes share dims.
struct Study {
    std::string id;
    Volume3D full;
    std::vector<Volume3D> low;
};

struct Dataset {
    std::vector<Study> studies;

    size_t num_pairs() const {
        size_t n = 0;
        for (const auto& s : studies) n += s.low.size();
        return n;
    }
};

struct DrawnSample {
    const Volume3D* low = nullptr;
    const Volume3D* full = nullptr;
    int s = 0;
};

// uniform over (study, fraction, slice)
DrawnSample draw_sample(const Dataset& d, RandomStream& rs);

// manifest.json written by gen-data; split is train|val|test|all
Dataset load_dataset(const std::string& manifest_path, const std::string& split);

}  // namespace petdiff
