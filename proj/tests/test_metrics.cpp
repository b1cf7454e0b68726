#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "petdiff/metrics.hpp"
#include "petdiff/rng.hpp"

using namespace petdiff;

namespace {

Volume3D random_volume(int ns, int ny, int nx, uint64_t seed, float lo, float hi) {
    Volume3D v(ns, ny, nx);
    RandomStream rs(seed);
    for (auto& e : v.data) e = float(rs.uniform_range(lo, hi));
    return v;
}

// two-pass window statistics, independent of the shipped single-pass route
double ssim_oracle(const Volume3D& x, const Volume3D& ref, int window, double k1, double k2) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (float r : ref.data)
        if (r != 0.f) {
            lo = std::min(lo, double(r));
            hi = std::max(hi, double(r));
        }
    double L = hi - lo;
    if (!(L > 0)) L = 1.0;
    const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);
    const int r = window / 2;
    double tot = 0;
    size_t wins = 0;
    for (int s = 0; s < ref.ns; ++s)
        for (int y = 0; y < ref.ny; ++y)
            for (int c = 0; c < ref.nx; ++c) {
                if (ref.at(s, y, c) == 0.f) continue;
                std::vector<double> xs, ys;
                for (int ws = std::max(0, s - r); ws <= std::min(ref.ns - 1, s + r); ++ws)
                    for (int wy = std::max(0, y - r); wy <= std::min(ref.ny - 1, y + r); ++wy)
                        for (int wx = std::max(0, c - r); wx <= std::min(ref.nx - 1, c + r); ++wx) {
                            if (ref.at(ws, wy, wx) == 0.f) continue;
                            xs.push_back(double(x.at(ws, wy, wx)));
                            ys.push_back(double(ref.at(ws, wy, wx)));
                        }
                const double n = double(xs.size());
                double mx = 0, my = 0;
                for (size_t i = 0; i < xs.size(); ++i) {
                    mx += xs[i];
                    my += ys[i];
                }
                mx /= n;
                my /= n;
                double vx = 0, vy = 0, cxy = 0;
                for (size_t i = 0; i < xs.size(); ++i) {
                    vx += (xs[i] - mx) * (xs[i] - mx);
                    vy += (ys[i] - my) * (ys[i] - my);
                    cxy += (xs[i] - mx) * (ys[i] - my);
                }
                vx /= n;
                vy /= n;
                cxy /= n;
                tot += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++wins;
            }
    return tot / double(wins);
}

}  // namespace

TEST_CASE("psnr matches the hand-computed two-voxel case") {
    Volume3D ref(1, 1, 2), x(1, 1, 2);
    ref.data = {1.f, 2.f};
    x.data = {1.f, 1.f};
    const double p = psnr(x, ref);
    CHECK(p == doctest::Approx(10.0 * std::log10(8.0)).epsilon(1e-12));

    // appended zero-reference voxels never shift the result
    Volume3D ref3(1, 1, 3), x3(1, 1, 3);
    ref3.data = {1.f, 2.f, 0.f};
    x3.data = {1.f, 1.f, 99.f};
    CHECK(psnr(x3, ref3) == p);

    CHECK(std::isinf(psnr(ref, ref)));

    Volume3D zero(1, 1, 2);
    CHECK_THROWS_AS(psnr(x, zero), std::invalid_argument);

    Volume3D neg(1, 1, 2);
    neg.data = {-1.f, -2.f};
    CHECK_THROWS_AS(psnr(x, neg), std::invalid_argument);

    Volume3D wrong(1, 2, 1);
    CHECK_THROWS_AS(psnr(wrong, ref), std::invalid_argument);
    CHECK_THROWS_AS(psnr(x, ref, std::vector<uint8_t>(3, 1)), std::invalid_argument);
}

TEST_CASE("nrmse is 0 at identity and exactly 1 at doubling") {
    auto ref = random_volume(3, 4, 5, 21, 0.5f, 2.0f);
    CHECK(nrmse(ref, ref) == 0.0);

    auto twice = ref;
    for (auto& e : twice.data) e = 2.f * e;
    CHECK(nrmse(twice, ref) == 1.0);

    Volume3D zero(3, 4, 5);
    CHECK_THROWS_AS(nrmse(ref, zero), std::invalid_argument);

    auto x = random_volume(3, 4, 5, 22, 0.5f, 2.0f);
    auto xr = x, rr = ref;
    std::reverse(xr.data.begin(), xr.data.end());
    std::reverse(rr.data.begin(), rr.data.end());
    CHECK(nrmse(xr, rr) == doctest::Approx(nrmse(x, ref)).epsilon(1e-13));
}

TEST_CASE("ssim is exactly 1 at identity and matches a two-pass oracle") {
    auto ref = random_volume(8, 8, 8, 31, 0.5f, 1.5f);
    CHECK(ssim(ref, ref) == 1.0);

    Volume3D flat(6, 6, 6, 0.7f);
    CHECK(ssim(flat, flat) == 1.0);

    // masked path: knock out a fifth of the reference
    RandomStream holes(32);
    for (auto& e : ref.data)
        if (holes.uniform() < 0.2) e = 0.f;
    auto x = random_volume(8, 8, 8, 33, 0.4f, 1.4f);
    CHECK(ssim(x, ref) == doctest::Approx(ssim_oracle(x, ref, 7, 0.01, 0.03)).epsilon(1e-9));
    CHECK(ssim(x, ref, build_mask(ref), 3) ==
          doctest::Approx(ssim_oracle(x, ref, 3, 0.01, 0.03)).epsilon(1e-9));

    CHECK_THROWS_AS(ssim(x, ref, build_mask(ref), 2), std::invalid_argument);
    Volume3D zero(8, 8, 8);
    CHECK_THROWS_AS(ssim(x, zero), std::invalid_argument);
}

TEST_CASE("ssim is symmetric when both inputs span the same range") {
    auto a = random_volume(8, 8, 8, 41, 0.3f, 1.9f);
    auto b = random_volume(8, 8, 8, 42, 0.3f, 1.9f);
    a.data[0] = b.data[0] = 0.25f;
    a.data[1] = b.data[1] = 2.0f;
    CHECK(ssim(a, b) == ssim(b, a));
}

TEST_CASE("z_consistency on constant, alternating, and ramp volumes") {
    Volume3D flat(3, 4, 5, 2.f);
    CHECK(z_consistency(flat) == 0.0);

    Volume3D alt(4, 3, 3);
    for (int s = 0; s < 4; ++s)
        for (size_t i = 0; i < alt.slice_size(); ++i) alt.slice(s)[i] = float(s % 2);
    CHECK(z_consistency(alt) == 1.0);

    Volume3D ramp(5, 4, 5);
    for (int s = 0; s < 5; ++s)
        for (size_t i = 0; i < ramp.slice_size(); ++i) ramp.slice(s)[i] = 0.25f * float(s);
    CHECK(z_consistency(ramp) == 0.25);

    Volume3D one(1, 4, 5, 1.f);
    CHECK_THROWS_AS(z_consistency(one), std::invalid_argument);
}

TEST_CASE("zero padding leaves every reference-based metric bit-identical") {
    auto ref = random_volume(6, 7, 9, 51, 0.5f, 2.0f);
    RandomStream holes(52);
    for (auto& e : ref.data)
        if (holes.uniform() < 0.3) e = 0.f;
    auto x = random_volume(6, 7, 9, 53, 0.4f, 1.8f);

    Volume3D refp(12, 13, 15), xp(12, 13, 15, 7.f);
    for (int s = 0; s < 6; ++s)
        for (int y = 0; y < 7; ++y)
            for (int c = 0; c < 9; ++c) {
                refp.at(s + 3, y + 2, c + 4) = ref.at(s, y, c);
                xp.at(s + 3, y + 2, c + 4) = x.at(s, y, c);
            }

    CHECK(psnr(xp, refp) == psnr(x, ref));
    CHECK(nrmse(xp, refp) == nrmse(x, ref));
    CHECK(ssim(xp, refp) == ssim(x, ref));
}

TEST_CASE("psnr and nrmse rank noisy volumes in opposite directions") {
    auto ref = random_volume(5, 6, 7, 61, 0.5f, 2.0f);
    RandomStream noise(62);
    std::vector<float> eps(ref.size());
    for (auto& e : eps) e = float(noise.normal());

    std::vector<double> ps, nr;
    for (double k : {0.05, 0.1, 0.2}) {
        auto x = ref;
        for (size_t i = 0; i < x.size(); ++i) x.data[i] += float(k) * eps[i];
        ps.push_back(psnr(x, ref));
        nr.push_back(nrmse(x, ref));
    }
    CHECK(ps[0] > ps[1]);
    CHECK(ps[1] > ps[2]);
    CHECK(nr[0] < nr[1]);
    CHECK(nr[1] < nr[2]);
}

TEST_CASE("score_pair returns the same numbers as the individual metrics") {
    auto ref = random_volume(4, 6, 6, 71, 0.5f, 2.0f);
    auto x = random_volume(4, 6, 6, 72, 0.5f, 2.0f);
    const auto s = score_pair(x, ref);
    CHECK(s.psnr == psnr(x, ref));
    CHECK(s.nrmse == nrmse(x, ref));
    CHECK(s.ssim == ssim(x, ref));
    CHECK(s.z_consistency == z_consistency(x));
}

TEST_CASE("suite_csv aggregates per method and fraction with mean and std") {
    std::vector<StudyScores> rows;
    rows.push_back({"a", "s1", 0.05, {10.0, 0.2, 0.8, 0.1}});
    rows.push_back({"b", "s1", 0.5, {20.0, 0.1, 0.9, 0.05}});
    rows.push_back({"a", "s2", 0.05, {14.0, 0.4, 0.6, 0.3}});
    rows.push_back({"a", "s3", 0.01, {30.0, 0.05, 0.95, 0.02}});

    const std::string expect =
        "method,fraction,psnr,nrmse,ssim,z_consistency\n"
        "a,0.01,30.000±0.000,0.0500±0.0000,0.9500±0.0000,0.0200±0.0000\n"
        "a,0.05,12.000±2.000,0.3000±0.1000,0.7000±0.1000,0.2000±0.1000\n"
        "b,0.5,20.000±0.000,0.1000±0.0000,0.9000±0.0000,0.0500±0.0000\n";
    CHECK(suite_csv(rows) == expect);
    CHECK(suite_csv({}) == "method,fraction,psnr,nrmse,ssim,z_consistency\n");
}
