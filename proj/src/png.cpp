#include "petdiff/png.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace petdiff {

namespace {

void put_be32(std::string& out, uint32_t v) {
    out.push_back(char(v >> 24));
    out.push_back(char(v >> 16));
    out.push_back(char(v >> 8));
    out.push_back(char(v));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_be32(out, uint32_t(data.size()));
    const size_t at = out.size();
    out.append(type, 4);
    out += data;
    uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(out.data() + at), uInt(4 + data.size()));
    put_be32(out, crc);
}

}  // namespace

void write_png_gray8(const std::string& path, int w, int h, const std::vector<uint8_t>& pix) {
    if (w < 1 || h < 1 || pix.size() != size_t(w) * size_t(h))
        throw std::invalid_argument("write_png_gray8: bad dimensions");

    // one filter byte (none) per scanline
    std::vector<uint8_t> raw(size_t(h) * (size_t(w) + 1));
    for (int y = 0; y < h; ++y) {
        raw[size_t(y) * (size_t(w) + 1)] = 0;
        std::memcpy(raw.data() + size_t(y) * (size_t(w) + 1) + 1, pix.data() + size_t(y) * w,
                    size_t(w));
    }
    uLongf zlen = compressBound(uLong(raw.size()));
    std::vector<uint8_t> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png_gray8: deflate failed");

    std::string ihdr;
    put_be32(ihdr, uint32_t(w));
    put_be32(ihdr, uint32_t(h));
    ihdr += '\x08';  // bit depth
    ihdr += '\x00';  // grayscale
    ihdr += '\x00';  // deflate
    ihdr += '\x00';  // adaptive filtering
    ihdr += '\x00';  // no interlace

    std::string out("\x89PNG\r\n\x1a\n", 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", std::string(reinterpret_cast<char*>(z.data()), zlen));
    put_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw format_error("write_png_gray8: cannot open " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw format_error("write_png_gray8: write failed for " + path);
}

namespace {

uint8_t shade(float v, double scale) {
    const double u = double(v) * scale * 255.0;
    return uint8_t(std::clamp(u, 0.0, 255.0));
}

}  // namespace

void render_eval_png(const std::string& path, const Volume3D& test, const Volume3D& ref) {
    if (test.ns != ref.ns || test.ny != ref.ny || test.nx != ref.nx)
        throw std::invalid_argument("render_eval_png: dims mismatch");

    float peak = 0.f;
    for (float v : ref.data) peak = std::max(peak, v);
    if (peak <= 0.f)
        for (float v : test.data) peak = std::max(peak, v);
    const double scale = peak > 0.f ? 1.0 / double(peak) : 1.0;

    const int s_mid = ref.ns / 2, x_mid = ref.nx / 2;
    const int panel_h = std::max(ref.ny, ref.ns);
    const int W = ref.nx + 1 + ref.ny, H = 2 * panel_h + 1;
    std::vector<uint8_t> pix(size_t(W) * size_t(H), 32);
    for (int x = 0; x < W; ++x) pix[size_t(panel_h) * W + x] = 255;
    for (int y = 0; y < H; ++y) pix[size_t(y) * W + ref.nx] = 255;

    const Volume3D* vols[2] = {&test, &ref};
    for (int row = 0; row < 2; ++row) {
        const Volume3D& v = *vols[row];
        const int y0 = row * (panel_h + 1);
        for (int y = 0; y < v.ny; ++y)
            for (int x = 0; x < v.nx; ++x)
                pix[size_t(y0 + y) * W + x] = shade(v.at(s_mid, y, x), scale);
        for (int s = 0; s < v.ns; ++s)
            for (int y = 0; y < v.ny; ++y)
                pix[size_t(y0 + s) * W + ref.nx + 1 + y] = shade(v.at(s, y, x_mid), scale);
    }
    write_png_gray8(path, W, H, pix);
}

}  // namespace petdiff
