#include "petdiff/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace petdiff {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

uint64_t derive_seed(uint64_t root, std::string_view tag) {
    return splitmix64(root ^ splitmix64(fnv1a(tag)));
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a) {
    return splitmix64(derive_seed(root, tag) ^ splitmix64(a));
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a, uint64_t b) {
    return splitmix64(derive_seed(root, tag, a) ^ splitmix64(~b));
}

double RandomStream::uniform() {
    return double(eng_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_pos() {
    return 1.0 - uniform();
}

double RandomStream::uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t RandomStream::index(uint64_t n) {
    if (n == 0) throw std::invalid_argument("index: empty range");
    // rejection keeps the draw unbiased for any n
    uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = eng_();
    } while (v >= lim);
    return v % n;
}

double RandomStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

void RandomStream::fill_normal(float* dst, size_t count) {
    for (size_t i = 0; i < count; ++i) dst[i] = float(normal());
}

uint64_t RandomStream::poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("poisson: lambda must be finite and >= 0");
    if (lambda == 0.0) return 0;
    if (lambda < 10.0) {
        // Knuth multiplication method
        double limit = std::exp(-lambda);
        double prod = 1.0;
        uint64_t k = 0;
        for (;;) {
            prod *= uniform_pos();
            if (prod <= limit) return k;
            ++k;
        }
    }
    // Hormann's PTRS transformed rejection, exact for lambda >= 10
    double slam = std::sqrt(lambda);
    double loglam = std::log(lambda);
    double b = 0.931 + 2.53 * slam;
    double a = -0.059 + 0.02483 * b;
    double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        double u = uniform() - 0.5;
        double v = uniform_pos();
        double us = 0.5 - std::fabs(u);
        double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return uint64_t(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            kf * loglam - lambda - std::lgamma(kf + 1.0))
            return uint64_t(kf);
    }
}

}  // namespace petdiff
