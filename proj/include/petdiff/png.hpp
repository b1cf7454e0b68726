#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petdiff/volume.hpp"

namespace petdiff {

// 8-bit grayscale PNG; pix is row-major, pix.size() == w * h
void write_png_gray8(const std::string& path, int w, int h, const std::vector<uint8_t>& pix);

// report panel: test volume (top) against reference (bottom), central
// transverse slice beside the central cross-slice profile, shared scale
// from the reference maximum
void render_eval_png(const std::string& path, const Volume3D& test, const Volume3D& ref);

}  // namespace petdiff
