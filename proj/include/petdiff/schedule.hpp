#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace petdiff {

// Forward-process tables, index t in [1, T]; alpha_bar[0] = 1 so t=0 means
// "no noise". beta_tilde[1] is exactly 0.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> beta_tilde;
};

// kind: "linear" (beta interpolated from beta_start to beta_end). Equal
// endpoints give a constant schedule.
NoiseSchedule make_schedule(int T, const std::string& kind, double beta_start, double beta_end);

double q_sample(double x0, double eps, const NoiseSchedule& s, int t);
void q_sample(const float* x0, const float* eps, float* out, size_t count,
              const NoiseSchedule& s, int t);

// mean of q(x_{t-1} | x_t, x0); at t=1 this is x0 exactly
double posterior_mean(double x_t, double x0, const NoiseSchedule& s, int t);
void posterior_mean(const float* x_t, const float* x0, float* out, size_t count,
                    const NoiseSchedule& s, int t);

double posterior_variance(const NoiseSchedule& s, int t);

}  // namespace petdiff
