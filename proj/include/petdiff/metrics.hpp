#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petdiff/volume.hpp"

namespace petdiff {

// Evaluation convention: voxels where the reference is exactly 0 are dropped
// from every reference-based metric, and the computations touch only masked
// voxels (in scan order), so padding a volume with zeros never changes them.
std::vector<uint8_t> build_mask(const Volume3D& ref);

// 10*log10(peak^2 / MSE) over the mask, peak = masked max of ref; +inf when
// the volumes agree on the mask
double psnr(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask);
double psnr(const Volume3D& x, const Volume3D& ref);

// RMSE over the mask divided by the RMS of ref over the mask
double nrmse(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask);
double nrmse(const Volume3D& x, const Volume3D& ref);

// mean local SSIM over cubic windows centered at each masked voxel; window
// stats use masked voxels only; stabilizers C = (k * L)^2 with L the masked
// dynamic range of ref (1 when degenerate)
double ssim(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask,
            int window = 7, double k1 = 0.01, double k2 = 0.03);
double ssim(const Volume3D& x, const Volume3D& ref);

// mean absolute difference between adjacent slices, over all voxels
double z_consistency(const Volume3D& x);

struct Scores {
    double psnr = 0, nrmse = 0, ssim = 0, z_consistency = 0;
};

Scores score_pair(const Volume3D& x, const Volume3D& ref);

struct StudyScores {
    std::string method, study;
    double fraction = 1.0;
    Scores s;
};

// one row per (method, fraction) with "mean±std" cells (population std);
// methods keep first-appearance order, fractions ascend within a method
std::string suite_csv(const std::vector<StudyScores>& rows);

}  // namespace petdiff
