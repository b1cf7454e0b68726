#include "petdiff/sampler.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace petdiff {

namespace {

void check_range(int t, int t_next, int T, const char* who) {
    if (t < 1 || t > T) throw std::out_of_range(std::string(who) + ": t out of range");
    if (t_next < 0 || t_next >= t)
        throw std::invalid_argument(std::string(who) + ": need 0 <= t_next < t");
}

struct StepCoef {
    double inv_sqrt_a;   // 1/sqrt(alpha_k)
    double coef_eps;     // beta_k / sqrt(1 - alpha_bar_t)
    double log_beta;     // log beta_k
    double log_bt;       // log beta_tilde_k, finite only when t_next >= 1
    bool stochastic;     // false at the terminal step
};

StepCoef respaced_coef(int t, int t_next, const NoiseSchedule& s) {
    const double ab_t = s.alpha_bar[size_t(t)];
    const double ab_n = s.alpha_bar[size_t(t_next)];
    const double alpha_k = ab_t / ab_n;
    const double beta_k = 1.0 - alpha_k;
    StepCoef c;
    c.inv_sqrt_a = 1.0 / std::sqrt(alpha_k);
    c.coef_eps = beta_k / std::sqrt(1.0 - ab_t);
    c.stochastic = t_next >= 1;
    c.log_beta = std::log(beta_k);
    c.log_bt = c.stochastic ? std::log(beta_k * (1.0 - ab_n) / (1.0 - ab_t)) : 0.0;
    return c;
}

}  // namespace

double ddpm_step_to(double x_t, double eps_hat, double v, int t, int t_next,
                    const NoiseSchedule& s, double z) {
    check_range(t, t_next, s.T, "ddpm_step_to");
    const auto c = respaced_coef(t, t_next, s);
    const double mu = (x_t - c.coef_eps * eps_hat) * c.inv_sqrt_a;
    if (!c.stochastic) return mu;
    const double log_var = v * c.log_beta + (1.0 - v) * c.log_bt;
    return mu + std::exp(0.5 * log_var) * z;
}

void ddpm_step_to(const float* x_t, const float* eps_hat, const float* v, int t, int t_next,
                  const NoiseSchedule& s, const float* z, size_t count, float* out) {
    check_range(t, t_next, s.T, "ddpm_step_to");
    const auto c = respaced_coef(t, t_next, s);
    if (!c.stochastic || z == nullptr) {
        for (size_t i = 0; i < count; ++i)
            out[i] = float((double(x_t[i]) - c.coef_eps * double(eps_hat[i])) * c.inv_sqrt_a);
        return;
    }
    for (size_t i = 0; i < count; ++i) {
        const double mu = (double(x_t[i]) - c.coef_eps * double(eps_hat[i])) * c.inv_sqrt_a;
        const double log_var = double(v[i]) * c.log_beta + (1.0 - double(v[i])) * c.log_bt;
        out[i] = float(mu + std::exp(0.5 * log_var) * double(z[i]));
    }
}

double ddpm_step(double x_t, double eps_hat, double v, int t, const NoiseSchedule& s, double z) {
    if (t < 1 || t > s.T) throw std::out_of_range("ddpm_step: t out of range");
    const double beta = s.beta[size_t(t)];
    const double mu =
        (x_t - beta / std::sqrt(1.0 - s.alpha_bar[size_t(t)]) * eps_hat) /
        std::sqrt(s.alpha[size_t(t)]);
    if (t == 1) return mu;  // beta_tilde[1] = 0, terminal noise suppressed
    const double log_var = v * std::log(beta) + (1.0 - v) * std::log(s.beta_tilde[size_t(t)]);
    return mu + std::exp(0.5 * log_var) * z;
}

void ddpm_step(const float* x_t, const float* eps_hat, const float* v, int t,
               const NoiseSchedule& s, const float* z, size_t count, float* out) {
    ddpm_step_to(x_t, eps_hat, v, t, t - 1, s, t == 1 ? nullptr : z, count, out);
}

double ddim_step(double x_t, double eps_hat, int t, int t_next, const NoiseSchedule& s) {
    check_range(t, t_next, s.T, "ddim_step");
    const double ab_t = s.alpha_bar[size_t(t)];
    const double ab_n = s.alpha_bar[size_t(t_next)];
    const double x0_hat = (x_t - std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(ab_t);
    return std::sqrt(ab_n) * x0_hat + std::sqrt(1.0 - ab_n) * eps_hat;
}

void ddim_step(const float* x_t, const float* eps_hat, int t, int t_next, const NoiseSchedule& s,
               size_t count, float* out) {
    check_range(t, t_next, s.T, "ddim_step");
    const double ab_t = s.alpha_bar[size_t(t)];
    const double ab_n = s.alpha_bar[size_t(t_next)];
    const double c_x = std::sqrt(ab_n) / std::sqrt(ab_t);
    const double c_e = std::sqrt(1.0 - ab_n) - c_x * std::sqrt(1.0 - ab_t);
    for (size_t i = 0; i < count; ++i)
        out[i] = float(c_x * double(x_t[i]) + c_e * double(eps_hat[i]));
}

std::vector<PlanStep> build_step_plan(const SampleConfig& cfg, const NoiseSchedule& s) {
    if (cfg.num_steps < 1 || cfg.t_prime < cfg.num_steps || cfg.t_prime > s.T)
        throw std::invalid_argument("build_step_plan: need 1 <= num_steps <= t_prime <= T");
    if (cfg.interleave_period < 1)
        throw std::invalid_argument("build_step_plan: interleave_period must be >= 1");

    std::vector<int> ts(size_t(cfg.num_steps));
    for (int k = 0; k < cfg.num_steps; ++k)
        ts[size_t(k)] = int(double(cfg.t_prime) * double(cfg.num_steps - k) / cfg.num_steps);
    std::vector<PlanStep> plan(size_t(cfg.num_steps));
    for (int k = 0; k < cfg.num_steps; ++k) {
        const int t = ts[size_t(k)];
        const int t_next = k + 1 < cfg.num_steps ? ts[size_t(k) + 1] : 0;
        if (t_next >= t)
            throw std::runtime_error("build_step_plan: rounding collision in step plan");
        plan[size_t(k)] = {t, t_next,
                           (k + 1) % cfg.interleave_period == 0 ? StepKind::DDPM : StepKind::DDIM};
    }
    return plan;
}

Volume3D sample_volume(const Volume3D& v_noisy, const DenoiserModel& den, const PriorModel* prior,
                       const SampleConfig& cfg, SampleStats* stats) {
    if (cfg.n != den.n)
        throw std::invalid_argument("sample_volume: config window size differs from model");
    if (!cfg.no_prior) {
        if (!prior) throw std::invalid_argument("sample_volume: prior model required");
        if (prior->n != den.n || prior->data_scale != den.data_scale)
            throw std::invalid_argument("sample_volume: prior/denoiser mismatch");
    }

    SampleConfig eff = cfg;
    if (cfg.no_prior) eff.t_prime = den.sched.T;  // full-chain start from pure noise
    const auto plan = build_step_plan(eff, den.sched);
    const int t_start = eff.t_prime;

    Volume3D x_prior(1, 1, 1);
    if (!cfg.no_prior) x_prior = denoise_prior(*prior, v_noisy);

    const int h = v_noisy.ny, w = v_noisy.nx;
    const size_t hw = size_t(h) * w;
    const double ab = den.sched.alpha_bar[size_t(t_start)];
    const double sq_ab = std::sqrt(ab), sq_1ab = std::sqrt(1.0 - ab);
    const float inv_scale = 1.f / den.data_scale;
    const double dose = cfg.no_dose ? 0.0 : v_noisy.meta.dose_bq;

    // start latents are fixed per volume unless no_fix_eps asks for per-slice
    std::vector<float> eps_a_vol(hw), eps_b_vol(hw);
    RandomStream(derive_seed(cfg.seed, "eps_a")).fill_normal(eps_a_vol.data(), hw);
    RandomStream(derive_seed(cfg.seed, "eps_b")).fill_normal(eps_b_vol.data(), hw);

    Volume3D out = v_noisy;
    int64_t n_evals = 0, n_merges = 0, n_ddim = 0, n_ddpm = 0;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) reduction(+ : n_evals, n_merges, n_ddim, n_ddpm) \
        num_threads(cfg.threads > 0 ? cfg.threads : omp_get_max_threads())
#endif
    for (int s = 0; s < v_noisy.ns; ++s) {
        detail::Workspace<float> ws;
        std::vector<float> cond(size_t(den.n) * hw);
        fill_cond_window(v_noisy, s, den.n, den.data_scale, cond.data());

        std::vector<float> eps_a = eps_a_vol, eps_b = eps_b_vol;
        if (cfg.no_fix_eps) {
            RandomStream(derive_seed(cfg.seed, "eps_a", uint64_t(s))).fill_normal(eps_a.data(), hw);
            RandomStream(derive_seed(cfg.seed, "eps_b", uint64_t(s))).fill_normal(eps_b.data(), hw);
        }

        std::vector<float> xa(hw), xb(hw);
        if (cfg.no_prior) {
            xa = eps_a;
            xb = eps_b;
        } else {
            const float* ps = x_prior.slice(s);
            for (size_t i = 0; i < hw; ++i) {
                const double p = double(ps[i]) * inv_scale;
                xa[i] = float(sq_ab * p + sq_1ab * double(eps_a[i]));
                xb[i] = float(sq_ab * p + sq_1ab * double(eps_b[i]));
            }
        }

        std::vector<float> in(size_t(1 + den.n) * hw), y(2 * hw), v(hw), z(hw), nxt(hw);
        std::copy(cond.begin(), cond.end(), in.begin() + std::ptrdiff_t(hw));

        auto eval_and_step = [&](const std::vector<float>& x, const PlanStep& st, size_t k,
                                 const char* ztag, std::vector<float>& dst) {
            std::copy(x.begin(), x.end(), in.begin());
            den.net.forward(in.data(), h, w, double(st.t), dose, y.data(), ws);
            n_evals += 1;
            if (st.kind == StepKind::DDIM) {
                ddim_step(x.data(), y.data(), st.t, st.t_next, den.sched, hw, dst.data());
                n_ddim += 1;
            } else {
                const float* zp = nullptr;
                if (st.t_next >= 1) {
                    RandomStream(derive_seed(cfg.seed, ztag, uint64_t(s), uint64_t(k)))
                        .fill_normal(z.data(), hw);
                    zp = z.data();
                }
                for (size_t i = 0; i < hw; ++i)
                    v[i] = float(1.0 / (1.0 + std::exp(-double(y[hw + i]))));
                ddpm_step_to(x.data(), y.data(), v.data(), st.t, st.t_next, den.sched, zp, hw,
                             nxt.data());
                std::copy(nxt.begin(), nxt.end(), dst.begin());
                n_ddpm += 1;
            }
        };

        for (size_t k = 0; k < plan.size(); ++k) {
            eval_and_step(xa, plan[k], k, "z", xa);
            if (k == 0 && !cfg.single_eps) {
                eval_and_step(xb, plan[k], k, "zb", xb);
                for (size_t i = 0; i < hw; ++i) xa[i] = 0.5f * (xa[i] + xb[i]);
                n_merges += 1;
            }
        }

        float* dst = out.slice(s);
        for (size_t i = 0; i < hw; ++i) dst[i] = xa[i] * den.data_scale;
    }

    if (stats) *stats = SampleStats{n_evals, n_merges, n_ddim, n_ddpm};
    return out;
}

}  // namespace petdiff
