#include "petdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace petdiff {

NoiseSchedule make_schedule(int T, const std::string& kind, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
    if (kind != "linear") throw std::invalid_argument("make_schedule: unknown kind '" + kind + "'");

    NoiseSchedule s;
    s.T = T;
    s.beta.assign(size_t(T) + 1, 0.0);
    s.alpha.assign(size_t(T) + 1, 1.0);
    s.alpha_bar.assign(size_t(T) + 1, 1.0);
    s.beta_tilde.assign(size_t(T) + 1, 0.0);

    for (int t = 1; t <= T; ++t) {
        double frac = (T == 1) ? 0.0 : double(t - 1) / double(T - 1);
        double b = beta_start + (beta_end - beta_start) * frac;
        if (!(b > 0.0 && b < 1.0))
            throw std::invalid_argument("make_schedule: beta out of (0,1)");
        s.beta[t] = b;
        s.alpha[t] = 1.0 - b;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    for (int t = 2; t <= T; ++t)
        s.beta_tilde[t] = s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]);
    return s;
}

namespace {
void check_t(const NoiseSchedule& s, int t, int lo) {
    if (t < lo || t > s.T) throw std::out_of_range("schedule: t out of range");
}
}  // namespace

double q_sample(double x0, double eps, const NoiseSchedule& s, int t) {
    check_t(s, t, 0);
    double ab = s.alpha_bar[t];
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

void q_sample(const float* x0, const float* eps, float* out, size_t count,
              const NoiseSchedule& s, int t) {
    check_t(s, t, 0);
    double a = std::sqrt(s.alpha_bar[t]);
    double b = std::sqrt(1.0 - s.alpha_bar[t]);
    for (size_t i = 0; i < count; ++i) out[i] = float(a * x0[i] + b * eps[i]);
}

double posterior_mean(double x_t, double x0, const NoiseSchedule& s, int t) {
    check_t(s, t, 1);
    // q(x_0 | x_1, x_0) is a point mass; the coefficient route only hits 1.0
    // up to rounding, so return the exact value
    if (t == 1) return x0;
    double ab_prev = s.alpha_bar[t - 1];
    double ab = s.alpha_bar[t];
    double c_xt = std::sqrt(s.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab);
    double c_x0 = std::sqrt(ab_prev) * s.beta[t] / (1.0 - ab);
    return c_xt * x_t + c_x0 * x0;
}

void posterior_mean(const float* x_t, const float* x0, float* out, size_t count,
                    const NoiseSchedule& s, int t) {
    check_t(s, t, 1);
    if (t == 1) {
        for (size_t i = 0; i < count; ++i) out[i] = x0[i];
        return;
    }
    double ab_prev = s.alpha_bar[t - 1];
    double ab = s.alpha_bar[t];
    double c_xt = std::sqrt(s.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab);
    double c_x0 = std::sqrt(ab_prev) * s.beta[t] / (1.0 - ab);
    for (size_t i = 0; i < count; ++i) out[i] = float(c_xt * x_t[i] + c_x0 * x0[i]);
}

double posterior_variance(const NoiseSchedule& s, int t) {
    check_t(s, t, 1);
    return s.beta_tilde[t];
}

}  // namespace petdiff
