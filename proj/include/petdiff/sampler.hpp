#pragma once

#include <cstdint>
#include <vector>

#include "petdiff/model.hpp"
#include "petdiff/prior.hpp"
#include "petdiff/schedule.hpp"

namespace petdiff {

enum class StepKind { DDIM, DDPM };

struct PlanStep {
    int t, t_next;
    StepKind kind;
};

struct SampleConfig {
    int t_prime = 250;
    int num_steps = 25;
    int interleave_period = 5;
    int n = 9;
    uint64_t seed = 0;
    bool no_prior = false;    // start from pure noise at t=T instead of the prior
    bool no_fix_eps = false;  // draw fresh start latents per slice
    bool single_eps = false;  // drop the second latent branch
    bool no_dose = false;     // zero the dose input to the denoiser
    int threads = 0;          // 0 keeps the runtime default
};

// stochastic reverse transition x_t -> x_{t-1}; v in [0,1] interpolates the
// variance between the posterior floor and beta in log space; z ignored at t=1
double ddpm_step(double x_t, double eps_hat, double v, int t, const NoiseSchedule& s, double z);
void ddpm_step(const float* x_t, const float* eps_hat, const float* v, int t,
               const NoiseSchedule& s, const float* z, size_t count, float* out);

// same transition respaced to an arbitrary earlier t_next; t_next=0 returns
// the mean (terminal noise suppressed); equals ddpm_step when t_next = t-1
double ddpm_step_to(double x_t, double eps_hat, double v, int t, int t_next,
                    const NoiseSchedule& s, double z);
void ddpm_step_to(const float* x_t, const float* eps_hat, const float* v, int t, int t_next,
                  const NoiseSchedule& s, const float* z, size_t count, float* out);

// deterministic reverse jump through the x0 estimate
double ddim_step(double x_t, double eps_hat, int t, int t_next, const NoiseSchedule& s);
void ddim_step(const float* x_t, const float* eps_hat, int t, int t_next, const NoiseSchedule& s,
               size_t count, float* out);

// evenly spaced strictly decreasing plan from t_prime to 0; every
// interleave_period-th step is DDPM
std::vector<PlanStep> build_step_plan(const SampleConfig& cfg, const NoiseSchedule& s);

struct SampleStats {
    int64_t net_evals = 0;
    int64_t branch_merges = 0;  // second-latent averaging events
    int64_t ddim_steps = 0;
    int64_t ddpm_steps = 0;
};

// full-volume reverse process: denoised prior start, two fixed latents merged
// at the first step, per-slice chains over the step plan
Volume3D sample_volume(const Volume3D& v_noisy, const DenoiserModel& den, const PriorModel* prior,
                       const SampleConfig& cfg, SampleStats* stats = nullptr);

}  // namespace petdiff
