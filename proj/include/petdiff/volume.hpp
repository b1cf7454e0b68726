#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace petdiff {

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StudyMeta {
    double dose_bq = 0.0;         // injected activity for this acquisition
    double count_fraction = 1.0;  // fraction of full-count events kept
    std::string id;
    double voxel_size_mm = 4.0;
    bool normalized = false;
};

// Dense 3D scalar volume, slice-major. Payload is float32 on disk and in
// memory; every voxel stays finite.
struct Volume3D {
    int ns = 0, ny = 0, nx = 0;
    std::vector<float> data;
    StudyMeta meta;

    Volume3D() = default;
    Volume3D(int s, int y, int x, float fill = 0.f)
        : ns(s), ny(y), nx(x), data(size_t(s) * y * x, fill) {
        if (s <= 0 || y <= 0 || x <= 0) throw std::invalid_argument("Volume3D: non-positive dims");
    }

    size_t size() const { return data.size(); }
    size_t slice_size() const { return size_t(ny) * nx; }
    float* slice(int s) { return data.data() + size_t(s) * slice_size(); }
    const float* slice(int s) const { return data.data() + size_t(s) * slice_size(); }
    float& at(int s, int y, int x) { return data[(size_t(s) * ny + y) * nx + x]; }
    float at(int s, int y, int x) const { return data[(size_t(s) * ny + y) * nx + x]; }
};

// n slice indices centered on s; out-of-range neighbors replicate the edge
// slice, so the result always holds valid indices. n odd.
std::vector<int> extract_window(const Volume3D& v, int s, int n);

// voxels / dose_bq; meta flagged as normalized. dose_bq must be > 0.
Volume3D normalize_by_dose(const Volume3D& v);

// Single-line JSON header + '\n' + little-endian float32 payload. Round-trips
// bit-exactly, including all metadata fields.
void save_volume(const std::string& path, const Volume3D& v);
Volume3D load_volume(const std::string& path);

}  // namespace petdiff
