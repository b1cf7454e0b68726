#include "petdiff/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace petdiff {

namespace {

double decayed_lr(const std::string& kind, float lr, int step, int total) {
    if (kind == "none") return lr;
    if (kind == "cosine") {
        double u = total > 1 ? double(step) / double(total - 1) : 1.0;
        return lr * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(u * 3.14159265358979323846)));
    }
    throw std::invalid_argument("unknown lr_decay " + kind);
}

}  // namespace

template <class S>
DiffusionLossTerms<S> diffusion_loss(const NoiseSchedule& sched, const S* x0, const S* x_t, int t,
                                     const S* eps, const S* eps_hat, const S* v_raw, size_t npix,
                                     double lambda) {
    if (t < 1 || t > sched.T) throw std::out_of_range("diffusion_loss: t out of range");
    if (npix == 0) throw std::invalid_argument("diffusion_loss: empty image");

    DiffusionLossTerms<S> out;
    out.d_eps_hat.resize(npix);
    out.d_v_raw.resize(npix);

    const double beta = sched.beta[size_t(t)];
    const double ab_t = sched.alpha_bar[size_t(t)];
    const double sqrt_a = std::sqrt(sched.alpha[size_t(t)]);
    const double coef_eps = beta / std::sqrt(1.0 - ab_t);
    const double log_beta = std::log(beta);
    // beta_tilde[1] is 0; its log is replaced by the next step's value so the
    // interpolation stays finite (the t=1 density uses the same floor)
    const double bt = sched.beta_tilde[size_t(t)];
    const double log_bt_c =
        t >= 2 ? std::log(bt) : (sched.T >= 2 ? std::log(sched.beta_tilde[2]) : log_beta);

    double acc_noise = 0, acc_vlb = 0;
    const double inv_n = 1.0 / double(npix);
    for (size_t i = 0; i < npix; ++i) {
        const double e = double(eps[i]), eh = double(eps_hat[i]);
        acc_noise += (eh - e) * (eh - e);
        out.d_eps_hat[i] = S(2.0 * (eh - e) * inv_n);

        const double v = 1.0 / (1.0 + std::exp(-double(v_raw[i])));
        const double log_var = v * log_beta + (1.0 - v) * log_bt_c;
        const double var = std::exp(log_var);
        const double mu_theta = (double(x_t[i]) - coef_eps * eh) / sqrt_a;

        double term, dterm_dlogvar;
        if (t >= 2) {
            const double mu_q = posterior_mean(double(x_t[i]), double(x0[i]), sched, t);
            const double d2 = (mu_q - mu_theta) * (mu_q - mu_theta);
            term = 0.5 * (log_var - std::log(bt) + (bt + d2) / var - 1.0);
            dterm_dlogvar = 0.5 * (1.0 - (bt + d2) / var);
        } else {
            const double d2 = (double(x0[i]) - mu_theta) * (double(x0[i]) - mu_theta);
            term = 0.5 * (std::log(2.0 * 3.14159265358979323846) + log_var + d2 / var);
            dterm_dlogvar = 0.5 * (1.0 - d2 / var);
        }
        acc_vlb += term;
        out.d_v_raw[i] =
            S(lambda * dterm_dlogvar * (log_beta - log_bt_c) * v * (1.0 - v) * inv_n);
    }
    out.loss_noise = acc_noise * inv_n;
    out.loss_vlb = acc_vlb * inv_n;
    return out;
}

template DiffusionLossTerms<float> diffusion_loss<float>(const NoiseSchedule&, const float*,
                                                         const float*, int, const float*,
                                                         const float*, const float*, size_t,
                                                         double);
template DiffusionLossTerms<double> diffusion_loss<double>(const NoiseSchedule&, const double*,
                                                           const double*, int, const double*,
                                                           const double*, const double*, size_t,
                                                           double);

StepLosses training_step(DenoiserModel& m, Optimizer& opt, const std::vector<TrainItem>& batch,
                         int h, int w, double lambda, bool dose_embedding, RandomStream& rs) {
    if (batch.empty()) throw std::invalid_argument("training_step: empty batch");
    const size_t hw = size_t(h) * w;
    const int in_ch = m.net.cfg.in_channels;

    static thread_local detail::Workspace<float> ws;
    ParamStore<float> grads = m.net.params;
    grads.zero();
    std::vector<float> x(size_t(in_ch) * hw), eps(hw), y(2 * hw), dy(2 * hw);

    StepLosses losses;
    const double inv_b = 1.0 / double(batch.size());
    for (const auto& item : batch) {
        if (item.x0.size() != hw || item.cond.size() != size_t(m.n) * hw)
            throw std::invalid_argument("training_step: item shape mismatch");
        const int t = 1 + int(rs.index(size_t(m.sched.T)));
        rs.fill_normal(eps.data(), hw);
        q_sample(item.x0.data(), eps.data(), x.data(), hw, m.sched, t);
        std::copy(item.cond.begin(), item.cond.end(), x.begin() + std::ptrdiff_t(hw));

        const double dose = dose_embedding ? item.dose_bq : 0.0;
        m.net.forward(x.data(), h, w, double(t), dose, y.data(), ws);

        auto terms = diffusion_loss<float>(m.sched, item.x0.data(), x.data(), t, eps.data(),
                                           y.data(), y.data() + hw, hw, lambda);
        losses.noise += terms.loss_noise * inv_b;
        losses.vlb += terms.loss_vlb * inv_b;
        for (size_t i = 0; i < hw; ++i) {
            dy[i] = float(terms.d_eps_hat[i] * inv_b);
            dy[hw + i] = float(terms.d_v_raw[i] * inv_b);
        }
        m.net.backward(dy.data(), ws, grads);
    }
    losses.total = losses.noise + lambda * losses.vlb;
    if (!std::isfinite(losses.total))
        throw std::runtime_error("training_step: non-finite loss (noise=" +
                                 std::to_string(losses.noise) +
                                 ", vlb=" + std::to_string(losses.vlb) + ")");
    opt.step(m.net.params, grads);
    return losses;
}

namespace {

std::vector<TrainItem> draw_batch(const Dataset& ds, int batch, int n, float data_scale,
                                  RandomStream& draw) {
    std::vector<TrainItem> items(static_cast<size_t>(batch));
    for (auto& item : items) {
        auto smp = draw_sample(ds, draw);
        const size_t hw = size_t(smp.full->ny) * smp.full->nx;
        item.x0.resize(hw);
        item.cond.resize(size_t(n) * hw);
        const float* full_s = smp.full->slice(smp.s);
        const float inv = 1.f / data_scale;
        for (size_t i = 0; i < hw; ++i) item.x0[i] = full_s[i] * inv;
        fill_cond_window(*smp.low, smp.s, n, data_scale, item.cond.data());
        item.dose_bq = smp.low->meta.dose_bq;
    }
    return items;
}

struct ValScores {
    double loss = 0, x0_psnr = 0;
};

// fixed draws and noise so successive evaluations are comparable; PSNR is of
// the one-shot x0 estimate at a fixed mid-chain t, peak 1 in network units
ValScores validate(DenoiserModel& m, const Dataset& val_ds, int batch, double lambda,
                   bool dose_embedding, uint64_t seed) {
    RandomStream draw(derive_seed(seed, "val_draw"));
    auto items = draw_batch(val_ds, batch, m.n, m.data_scale, draw);
    const int h = val_ds.studies[0].full.ny, w = val_ds.studies[0].full.nx;
    const size_t hw = size_t(h) * w;
    const int t_probe = std::max(1, std::min(m.sched.T, 100));

    static thread_local detail::Workspace<float> ws;
    std::vector<float> x(size_t(m.net.cfg.in_channels) * hw), eps(hw), y(2 * hw);
    RandomStream rs(derive_seed(seed, "val_noise"));
    ValScores out;
    double mse = 0;
    for (const auto& item : items) {
        rs.fill_normal(eps.data(), hw);
        q_sample(item.x0.data(), eps.data(), x.data(), hw, m.sched, t_probe);
        std::copy(item.cond.begin(), item.cond.end(), x.begin() + std::ptrdiff_t(hw));
        m.net.forward(x.data(), h, w, double(t_probe), dose_embedding ? item.dose_bq : 0.0,
                      y.data(), ws);
        auto terms = diffusion_loss<float>(m.sched, item.x0.data(), x.data(), t_probe, eps.data(),
                                           y.data(), y.data() + hw, hw, lambda);
        out.loss += (terms.loss_noise + lambda * terms.loss_vlb) / double(items.size());
        const double ab = m.sched.alpha_bar[size_t(t_probe)];
        const double c0 = 1.0 / std::sqrt(ab), c1 = std::sqrt(1.0 - ab) / std::sqrt(ab);
        for (size_t i = 0; i < hw; ++i) {
            double x0_hat = c0 * double(x[i]) - c1 * double(y[i]);
            double d = x0_hat - double(item.x0[i]);
            mse += d * d / (double(hw) * items.size());
        }
    }
    out.x0_psnr = mse > 0 ? -10.0 * std::log10(mse) : 99.0;
    return out;
}

}  // namespace

DenoiserModel train(const Dataset& train_ds, const Dataset* val_ds, const TrainConfig& cfg) {
    if (train_ds.studies.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch < 1 || cfg.steps < 1)
        throw std::invalid_argument("train: batch and steps must be >= 1");
    if (cfg.n < 1 || cfg.n % 2 == 0) throw std::invalid_argument("train: n must be odd");

    auto m = make_denoiser(denoiser_net_config(cfg.n, cfg.w0, cfg.w1, cfg.w2, cfg.emb_dim), cfg.n,
                           cfg.data_scale, cfg.sched);
    auto opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.momentum);
    int64_t start_step = 0;

    if (!cfg.resume_from.empty()) {
        auto ckpt = load_checkpoint(cfg.resume_from);
        auto prev = load_denoiser(cfg.resume_from);
        if (to_json(prev.net.cfg) != to_json(m.net.cfg) || prev.n != m.n)
            throw std::invalid_argument("train: resume checkpoint does not match config");
        m.net.params = prev.net.params;
        start_step = ckpt.meta.at("train_step").get<int64_t>();
        std::vector<NamedTensor<float>> opt_state;
        for (const auto& a : ckpt.arrays)
            if (a.name.rfind("opt.", 0) == 0) {
                NamedTensor<float> s = a;
                s.name = a.name.substr(4);
                opt_state.push_back(std::move(s));
            }
        if (!opt_state.empty()) opt->load_state(opt_state);
    } else {
        m.net.init(derive_seed(cfg.seed, "denoiser_init"));
    }

    const int h = train_ds.studies[0].full.ny, w = train_ds.studies[0].full.nx;
    std::ofstream log;
    std::string ckpt_path;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        ckpt_path = cfg.out_dir + "/denoiser_latest.ckpt";
        log.open(cfg.out_dir + "/train_log.csv", start_step > 0 ? std::ios::app : std::ios::trunc);
        if (!log) throw format_error("train: cannot open log in " + cfg.out_dir);
        if (start_step == 0) log << "step,loss,loss_noise,loss_vlb,lr,val_loss,val_x0_psnr\n";
    }

    auto save = [&](const std::string& path, int64_t step) {
        std::vector<NamedTensor<float>> extra;
        for (auto a : opt->state_arrays()) {
            a.name = "opt." + a.name;
            extra.push_back(std::move(a));
        }
        save_denoiser(path, m, step, extra);
    };

    for (int64_t step = start_step; step < cfg.steps; ++step) {
        opt->set_lr(float(decayed_lr(cfg.lr_decay, cfg.lr, int(step), cfg.steps)));
        RandomStream draw(derive_seed(cfg.seed, "draw", uint64_t(step)));
        auto batch = draw_batch(train_ds, cfg.batch, cfg.n, cfg.data_scale, draw);
        RandomStream rs(derive_seed(cfg.seed, "step", uint64_t(step)));

        StepLosses losses;
        try {
            losses = training_step(m, *opt, batch, h, w, cfg.lambda_vlb, cfg.dose_embedding, rs);
        } catch (const std::runtime_error&) {
            // the failing step never updated params; leave the scheduled
            // latest checkpoint as the last good state
            if (!ckpt_path.empty()) {
                try {
                    save(cfg.out_dir + "/denoiser_diverged.ckpt", step);
                } catch (const std::exception&) {
                    // params already non-finite; nothing worth keeping
                }
            }
            throw;
        }

        const bool last = step == cfg.steps - 1;
        if (log && (step % cfg.log_every == 0 || last)) {
            log << step << ',' << losses.total << ',' << losses.noise << ',' << losses.vlb << ','
                << decayed_lr(cfg.lr_decay, cfg.lr, int(step), cfg.steps);
            if (val_ds && (step % cfg.val_every == 0 || last)) {
                auto v = validate(m, *val_ds, 16, cfg.lambda_vlb, cfg.dose_embedding, cfg.seed);
                log << ',' << v.loss << ',' << v.x0_psnr;
            } else {
                log << ",,";
            }
            log << '\n' << std::flush;
        }
        if (!ckpt_path.empty() && ((step + 1) % cfg.ckpt_every == 0 || last))
            save(ckpt_path, step + 1);
    }
    return m;
}

}  // namespace petdiff
