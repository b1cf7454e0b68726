#include "petdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace petdiff {

namespace {

void check_pair(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask,
                const char* who) {
    if (x.ns != ref.ns || x.ny != ref.ny || x.nx != ref.nx)
        throw std::invalid_argument(std::string(who) + ": dims mismatch");
    if (mask.size() != ref.size())
        throw std::invalid_argument(std::string(who) + ": mask size mismatch");
}

}  // namespace

std::vector<uint8_t> build_mask(const Volume3D& ref) {
    std::vector<uint8_t> m(ref.size());
    for (size_t i = 0; i < m.size(); ++i) m[i] = ref.data[i] != 0.f;
    return m;
}

double psnr(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask) {
    check_pair(x, ref, mask, "psnr");
    size_t cnt = 0;
    double err2 = 0, peak = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double d = double(x.data[i]) - double(ref.data[i]);
        err2 += d * d;
        peak = std::max(peak, double(ref.data[i]));
        ++cnt;
    }
    if (cnt == 0) throw std::invalid_argument("psnr: empty mask");
    if (!(peak > 0)) throw std::invalid_argument("psnr: reference peak not positive");
    if (err2 == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak * double(cnt) / err2);
}

double nrmse(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask) {
    check_pair(x, ref, mask, "nrmse");
    size_t cnt = 0;
    double err2 = 0, ref2 = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const double r = double(ref.data[i]);
        const double d = double(x.data[i]) - r;
        err2 += d * d;
        ref2 += r * r;
        ++cnt;
    }
    if (cnt == 0) throw std::invalid_argument("nrmse: empty mask");
    if (ref2 == 0) throw std::invalid_argument("nrmse: reference is zero under mask");
    return std::sqrt(err2 / ref2);
}

double ssim(const Volume3D& x, const Volume3D& ref, const std::vector<uint8_t>& mask, int window,
            double k1, double k2) {
    check_pair(x, ref, mask, "ssim");
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("ssim: window must be odd and positive");

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    size_t cnt = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        lo = std::min(lo, double(ref.data[i]));
        hi = std::max(hi, double(ref.data[i]));
        ++cnt;
    }
    if (cnt == 0) throw std::invalid_argument("ssim: no contributing windows");
    double L = hi - lo;
    if (!(L > 0)) L = 1.0;
    const double C1 = (k1 * L) * (k1 * L), C2 = (k2 * L) * (k2 * L);
    const int r = window / 2;
    const size_t hw = ref.slice_size();

    // per-slice partials summed in slice order keep the result independent of
    // the thread count and of zero-voxel padding
    std::vector<double> part(size_t(ref.ns), 0.0);
    std::vector<int64_t> wins(size_t(ref.ns), 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int s = 0; s < ref.ns; ++s) {
        double acc = 0;
        int64_t n_wins = 0;
        for (int yy = 0; yy < ref.ny; ++yy)
            for (int xx = 0; xx < ref.nx; ++xx) {
                const size_t ci = size_t(s) * hw + size_t(yy) * ref.nx + xx;
                if (!mask[ci]) continue;
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                int n = 0;
                const int s1 = std::min(ref.ns - 1, s + r), y1 = std::min(ref.ny - 1, yy + r);
                const int x1 = std::min(ref.nx - 1, xx + r);
                for (int ws = std::max(0, s - r); ws <= s1; ++ws)
                    for (int wy = std::max(0, yy - r); wy <= y1; ++wy)
                        for (int wx = std::max(0, xx - r); wx <= x1; ++wx) {
                            const size_t j = size_t(ws) * hw + size_t(wy) * ref.nx + wx;
                            if (!mask[j]) continue;
                            const double a = double(x.data[j]), b = double(ref.data[j]);
                            sx += a;
                            sy += b;
                            sxx += a * a;
                            syy += b * b;
                            sxy += a * b;
                            ++n;
                        }
                const double inv = 1.0 / double(n);
                const double mx = sx * inv, my = sy * inv;
                const double vx = sxx * inv - mx * mx, vy = syy * inv - my * my;
                const double cxy = sxy * inv - mx * my;
                const double num = (2.0 * mx * my + C1) * (2.0 * cxy + C2);
                const double den = (mx * mx + my * my + C1) * (vx + vy + C2);
                acc += num / den;
                ++n_wins;
            }
        part[size_t(s)] = acc;
        wins[size_t(s)] = n_wins;
    }

    double total = 0;
    int64_t n_total = 0;
    for (int s = 0; s < ref.ns; ++s) {
        total += part[size_t(s)];
        n_total += wins[size_t(s)];
    }
    return total / double(n_total);
}

double psnr(const Volume3D& x, const Volume3D& ref) { return psnr(x, ref, build_mask(ref)); }
double nrmse(const Volume3D& x, const Volume3D& ref) { return nrmse(x, ref, build_mask(ref)); }
double ssim(const Volume3D& x, const Volume3D& ref) { return ssim(x, ref, build_mask(ref)); }

double z_consistency(const Volume3D& x) {
    if (x.ns < 2) throw std::invalid_argument("z_consistency: need at least two slices");
    const size_t hw = x.slice_size();
    double acc = 0;
    for (int s = 0; s + 1 < x.ns; ++s) {
        const float* a = x.slice(s);
        const float* b = x.slice(s + 1);
        for (size_t i = 0; i < hw; ++i) acc += std::abs(double(b[i]) - double(a[i]));
    }
    return acc / (double(x.ns - 1) * double(hw));
}

Scores score_pair(const Volume3D& x, const Volume3D& ref) {
    const auto mask = build_mask(ref);
    Scores s;
    s.psnr = psnr(x, ref, mask);
    s.nrmse = nrmse(x, ref, mask);
    s.ssim = ssim(x, ref, mask);
    s.z_consistency = z_consistency(x);
    return s;
}

namespace {

struct MeanStd {
    double mean = 0, std = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    for (double e : v) out.mean += e / double(v.size());
    double acc = 0;
    for (double e : v) acc += (e - out.mean) * (e - out.mean);
    out.std = std::sqrt(acc / double(v.size()));
    return out;
}

}  // namespace

std::string suite_csv(const std::vector<StudyScores>& rows) {
    std::vector<std::string> methods;
    for (const auto& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);

    std::string out = "method,fraction,psnr,nrmse,ssim,z_consistency\n";
    for (const auto& m : methods) {
        std::vector<double> fracs;
        for (const auto& r : rows)
            if (r.method == m && std::find(fracs.begin(), fracs.end(), r.fraction) == fracs.end())
                fracs.push_back(r.fraction);
        std::sort(fracs.begin(), fracs.end());
        for (double f : fracs) {
            std::vector<double> ps, nr, ss, zc;
            for (const auto& r : rows)
                if (r.method == m && r.fraction == f) {
                    ps.push_back(r.s.psnr);
                    nr.push_back(r.s.nrmse);
                    ss.push_back(r.s.ssim);
                    zc.push_back(r.s.z_consistency);
                }
            const auto p = mean_std(ps), n = mean_std(nr), s = mean_std(ss), z = mean_std(zc);
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "%s,%g,%.3f±%.3f,%.4f±%.4f,%.4f±%.4f,%.4f±%.4f\n", m.c_str(), f,
                          p.mean, p.std, n.mean, n.std, s.mean, s.std, z.mean, z.std);
            out += buf;
        }
    }
    return out;
}

}  // namespace petdiff
