#include "petdiff/prior.hpp"

#include <cmath>
#include <fstream>

#include "petdiff/optim.hpp"

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

PriorModel train_prior(const Dataset& ds, const PriorTrainConfig& cfg, const std::string& log_csv) {
    if (ds.studies.empty()) throw std::invalid_argument("train_prior: empty dataset");
    if (cfg.batch < 1 || cfg.steps < 1)
        throw std::invalid_argument("train_prior: batch and steps must be >= 1");

    auto m = make_prior(prior_net_config(cfg.n, cfg.w0, cfg.w1, cfg.w2, cfg.emb_dim), cfg.n,
                        cfg.data_scale);
    m.net.init(derive_seed(cfg.seed, "prior_init"));
    auto opt = make_optimizer(cfg.optimizer, cfg.lr, cfg.momentum);

    const int h = ds.studies[0].full.ny, w = ds.studies[0].full.nx;
    const size_t hw = size_t(h) * w;
    const float inv_scale = 1.f / cfg.data_scale;

    std::ofstream log;
    if (!log_csv.empty()) {
        log.open(log_csv, std::ios::trunc);
        if (!log) throw format_error("train_prior: cannot open log " + log_csv);
        log << "step,loss,lr\n";
    }

    detail::Workspace<float> ws;
    ParamStore<float> grads = m.net.params;
    std::vector<float> x(size_t(cfg.n) * hw), y(hw), tgt(hw), dy(hw);

    for (int step = 0; step < cfg.steps; ++step) {
        opt->set_lr(float(decayed_lr(cfg.lr_decay, cfg.lr, step, cfg.steps)));
        RandomStream draw(derive_seed(cfg.seed, "prior_draw", uint64_t(step)));
        grads.zero();
        double loss = 0;
        for (int b = 0; b < cfg.batch; ++b) {
            auto smp = draw_sample(ds, draw);
            fill_cond_window(*smp.low, smp.s, cfg.n, cfg.data_scale, x.data());
            const float* full_s = smp.full->slice(smp.s);
            for (size_t i = 0; i < hw; ++i) tgt[i] = full_s[i] * inv_scale;

            m.net.forward(x.data(), h, w, 0.0, smp.low->meta.dose_bq, y.data(), ws);
            double item = 0;
            for (size_t i = 0; i < hw; ++i) {
                double d = double(y[i]) - tgt[i];
                item += d * d;
                dy[i] = float(2.0 * d / (double(hw) * cfg.batch));
            }
            loss += item / (double(hw) * cfg.batch);
            m.net.backward(dy.data(), ws, grads);
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("train_prior: non-finite loss at step " + std::to_string(step));
        opt->step(m.net.params, grads);
        if (log && (step % cfg.log_every == 0 || step == cfg.steps - 1))
            log << step << ',' << loss << ',' << decayed_lr(cfg.lr_decay, cfg.lr, step, cfg.steps)
                << '\n';
    }
    return m;
}

Volume3D denoise_prior(const PriorModel& m, const Volume3D& v_noisy) {
    Volume3D out = v_noisy;
    const int h = v_noisy.ny, w = v_noisy.nx;
    const size_t hw = size_t(h) * w;

#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < v_noisy.ns; ++s) {
        detail::Workspace<float> ws;
        std::vector<float> x(size_t(m.n) * hw), y(hw);
        fill_cond_window(v_noisy, s, m.n, m.data_scale, x.data());
        m.net.forward(x.data(), h, w, 0.0, v_noisy.meta.dose_bq, y.data(), ws);
        float* dst = out.slice(s);
        for (size_t i = 0; i < hw; ++i) dst[i] = y[i] * m.data_scale;
    }
    return out;
}

}  // namespace petdiff
