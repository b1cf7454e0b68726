#include "petdiff/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace petdiff {

using nlohmann::json;

std::vector<int> extract_window(const Volume3D& v, int s, int n) {
    if (n < 1 || n % 2 == 0) throw std::invalid_argument("extract_window: n must be odd and >= 1");
    if (s < 0 || s >= v.ns) throw std::out_of_range("extract_window: slice index out of range");
    std::vector<int> idx(n);
    int half = n / 2;
    for (int i = 0; i < n; ++i) idx[i] = std::clamp(s - half + i, 0, v.ns - 1);
    return idx;
}

Volume3D normalize_by_dose(const Volume3D& v) {
    if (!(v.meta.dose_bq > 0.0))
        throw std::invalid_argument("normalize_by_dose: dose_bq must be > 0");
    Volume3D out = v;
    float inv = float(1.0 / v.meta.dose_bq);
    for (float& x : out.data) x *= inv;
    out.meta.normalized = true;
    return out;
}

void save_volume(const std::string& path, const Volume3D& v) {
    if (size_t(v.ns) * v.ny * v.nx != v.data.size())
        throw format_error("save_volume: dims do not match payload size");
    for (float x : v.data)
        if (!std::isfinite(x)) throw format_error("save_volume: non-finite voxel");

    json h;
    h["dims"] = {v.ns, v.ny, v.nx};
    h["voxel_size_mm"] = v.meta.voxel_size_mm;
    h["dose_bq"] = v.meta.dose_bq;
    h["count_fraction"] = v.meta.count_fraction;
    h["id"] = v.meta.id;
    h["normalized"] = v.meta.normalized;
    h["byte_order"] = "LE";
    h["scalar_bits"] = 32;
    h["version"] = 1;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw format_error("save_volume: cannot open " + path);
    f << h.dump() << '\n';
    f.write(reinterpret_cast<const char*>(v.data.data()),
            std::streamsize(v.data.size() * sizeof(float)));
    if (!f) throw format_error("save_volume: write failed for " + path);
}

Volume3D load_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw format_error("load_volume: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw format_error("load_volume: missing header");

    json h;
    try {
        h = json::parse(header);
    } catch (const json::exception& e) {
        throw format_error("load_volume: bad header JSON: " + std::string(e.what()));
    }
    try {
        if (h.at("version").get<int>() != 1) throw format_error("load_volume: unsupported version");
        if (h.at("byte_order").get<std::string>() != "LE")
            throw format_error("load_volume: unsupported byte order");
        if (h.at("scalar_bits").get<int>() != 32)
            throw format_error("load_volume: unsupported scalar width");

        auto dims = h.at("dims").get<std::vector<int>>();
        if (dims.size() != 3 || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
            throw format_error("load_volume: bad dims");

        Volume3D v(dims[0], dims[1], dims[2]);
        v.meta.voxel_size_mm = h.at("voxel_size_mm").get<double>();
        v.meta.dose_bq = h.at("dose_bq").get<double>();
        v.meta.count_fraction = h.at("count_fraction").get<double>();
        v.meta.id = h.at("id").get<std::string>();
        v.meta.normalized = h.value("normalized", false);

        f.read(reinterpret_cast<char*>(v.data.data()),
               std::streamsize(v.data.size() * sizeof(float)));
        if (size_t(f.gcount()) != v.data.size() * sizeof(float))
            throw format_error("load_volume: truncated payload in " + path);
        // a full volume plus trailing bytes is equally malformed
        char extra;
        if (f.read(&extra, 1)) throw format_error("load_volume: trailing bytes in " + path);

        for (float x : v.data)
            if (!std::isfinite(x)) throw format_error("load_volume: non-finite voxel in " + path);
        return v;
    } catch (const json::exception& e) {
        throw format_error("load_volume: bad header field: " + std::string(e.what()));
    }
}

}  // namespace petdiff
