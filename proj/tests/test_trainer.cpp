#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "petdiff/trainer.hpp"

using namespace petdiff;

namespace {

NoiseSchedule toy_sched() { return make_schedule(3, "linear", 0.1, 0.3); }

bool params_equal(const ParamStore<float>& a, const ParamStore<float>& b) {
    if (a.t.size() != b.t.size()) return false;
    for (size_t i = 0; i < a.t.size(); ++i)
        if (a.t[i].name != b.t[i].name || a.t[i].v != b.t[i].v) return false;
    return true;
}

Dataset toy_dataset(int n_studies, int ns, int h, int w, uint64_t seed) {
    Dataset ds;
    RandomStream rs(derive_seed(seed, "toy_ds"));
    for (int k = 0; k < n_studies; ++k) {
        Study st;
        st.id = "s" + std::to_string(k);
        st.full = Volume3D(ns, h, w);
        const double cy = h * (0.3 + 0.4 * rs.uniform());
        const double cx = w * (0.3 + 0.4 * rs.uniform());
        for (int s = 0; s < ns; ++s)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double r2 =
                        ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (0.15 * h * w);
                    st.full.at(s, y, x) = float(2.0 * std::exp(-r2) + 0.2);
                }
        st.full.meta.id = st.id;
        st.full.meta.dose_bq = 2e8;
        Volume3D low = st.full;
        low.meta.count_fraction = 0.1;
        low.meta.dose_bq = 2e7;
        for (auto& v : low.data) v = std::max(0.f, v + float(0.3 * rs.normal()));
        st.low.push_back(std::move(low));
        ds.studies.push_back(std::move(st));
    }
    return ds;
}

std::vector<TrainItem> make_batch(const Dataset& ds, int batch, int n, float data_scale,
                                  RandomStream& rs) {
    std::vector<TrainItem> items(static_cast<size_t>(batch));
    for (auto& it : items) {
        auto smp = draw_sample(ds, rs);
        const size_t hw = size_t(smp.full->ny) * smp.full->nx;
        it.x0.resize(hw);
        it.cond.resize(size_t(n) * hw);
        const float* fs = smp.full->slice(smp.s);
        for (size_t i = 0; i < hw; ++i) it.x0[i] = fs[i] / data_scale;
        fill_cond_window(*smp.low, smp.s, n, data_scale, it.cond.data());
        it.dose_bq = smp.low->meta.dose_bq;
    }
    return items;
}

DenoiserModel tiny_model(uint64_t seed) {
    ScheduleDesc sd{50, "linear", 1e-3, 0.04};
    auto m = make_denoiser(denoiser_net_config(3, 4, 6, 8, 16), 3, 4.f, sd);
    m.net.init(derive_seed(seed, "tiny_model"));
    return m;
}

}  // namespace

TEST_CASE("noise loss and its gradient vanish when the estimate is exact") {
    auto s = toy_sched();
    const size_t n = 5;
    std::vector<double> x0(n), eps(n), xt(n), vr(n);
    RandomStream rs(derive_seed(31, "exact"));
    for (size_t i = 0; i < n; ++i) {
        x0[i] = rs.normal();
        eps[i] = rs.normal();
        vr[i] = rs.normal();
        xt[i] = q_sample(x0[i], eps[i], s, 2);
    }
    auto terms = diffusion_loss<double>(s, x0.data(), xt.data(), 2, eps.data(), eps.data(),
                                        vr.data(), n, 0.001);
    CHECK(terms.loss_noise == 0.0);
    for (size_t i = 0; i < n; ++i) CHECK(terms.d_eps_hat[i] == 0.0);
    CHECK(std::isfinite(terms.loss_vlb));

    auto zero_l = diffusion_loss<double>(s, x0.data(), xt.data(), 2, eps.data(), eps.data(),
                                         vr.data(), n, 0.0);
    for (size_t i = 0; i < n; ++i) CHECK(zero_l.d_v_raw[i] == 0.0);

    CHECK_THROWS_AS(diffusion_loss<double>(s, x0.data(), xt.data(), 0, eps.data(), eps.data(),
                                           vr.data(), n, 0.001),
                    std::out_of_range);
    CHECK_THROWS_AS(diffusion_loss<double>(s, x0.data(), xt.data(), 4, eps.data(), eps.data(),
                                           vr.data(), n, 0.001),
                    std::out_of_range);
    CHECK_THROWS_AS(diffusion_loss<double>(s, x0.data(), xt.data(), 2, eps.data(), eps.data(),
                                           vr.data(), 0, 0.001),
                    std::invalid_argument);
}

TEST_CASE("hybrid loss matches hand-evaluated values") {
    auto s = toy_sched();
    const std::vector<double> x0 = {0.5, -0.3}, eps = {0.8, -1.1};
    const std::vector<double> eps_hat = {0.6, -0.9}, v_raw = {0.4, -1.2};

    std::vector<double> xt(2);
    for (size_t i = 0; i < 2; ++i) xt[i] = q_sample(x0[i], eps[i], s, 2);
    CHECK(xt[0] == doctest::Approx(0.84758427848226314).epsilon(1e-14));
    CHECK(xt[1] == doctest::Approx(-0.83662372966136711).epsilon(1e-14));
    auto t2 = diffusion_loss<double>(s, x0.data(), xt.data(), 2, eps.data(), eps_hat.data(),
                                     v_raw.data(), 2, 0.001);
    CHECK(t2.loss_noise == doctest::Approx(0.040000000000000029).epsilon(1e-12));
    CHECK(t2.loss_vlb == doctest::Approx(0.078837088758061613).epsilon(1e-12));

    for (size_t i = 0; i < 2; ++i) xt[i] = q_sample(x0[i], eps[i], s, 1);
    CHECK(xt[0] == doctest::Approx(0.72732386183872721).epsilon(1e-14));
    CHECK(xt[1] == doctest::Approx(-0.63245553203367577).epsilon(1e-14));
    auto t1 = diffusion_loss<double>(s, x0.data(), xt.data(), 1, eps.data(), eps_hat.data(),
                                     v_raw.data(), 2, 0.001);
    CHECK(t1.loss_noise == doctest::Approx(0.040000000000000029).epsilon(1e-12));
    CHECK(t1.loss_vlb == doctest::Approx(-0.30365098837171156).epsilon(1e-12));
}

TEST_CASE("loss gradients match finite differences of their own terms") {
    // the variance term treats the noise estimate as constant, so the noise
    // gradient is checked against the noise term alone
    auto s = make_schedule(20, "linear", 0.01, 0.1);
    const size_t n = 6;
    const double lambda = 0.001, h = 1e-6;
    RandomStream rs(derive_seed(32, "fd"));
    for (int t : {1, 2, 17}) {
        CAPTURE(t);
        std::vector<double> x0(n), eps(n), xt(n), eh(n), vr(n);
        for (size_t i = 0; i < n; ++i) {
            x0[i] = rs.normal();
            eps[i] = rs.normal();
            xt[i] = q_sample(x0[i], eps[i], s, t);
            eh[i] = eps[i] + 0.3 * rs.normal();
            vr[i] = rs.normal();
        }
        auto base = diffusion_loss<double>(s, x0.data(), xt.data(), t, eps.data(), eh.data(),
                                           vr.data(), n, lambda);
        for (size_t i = 0; i < n; ++i) {
            CAPTURE(i);
            auto ep = eh, em = eh;
            ep[i] += h;
            em[i] -= h;
            const double lp = diffusion_loss<double>(s, x0.data(), xt.data(), t, eps.data(),
                                                     ep.data(), vr.data(), n, lambda)
                                  .loss_noise;
            const double lm = diffusion_loss<double>(s, x0.data(), xt.data(), t, eps.data(),
                                                     em.data(), vr.data(), n, lambda)
                                  .loss_noise;
            const double fd = (lp - lm) / (2 * h);
            CHECK(std::abs(fd - base.d_eps_hat[i]) <=
                  1e-6 * std::max(1e-6, std::abs(base.d_eps_hat[i])));

            auto vp = vr, vm = vr;
            vp[i] += h;
            vm[i] -= h;
            const double vlp = diffusion_loss<double>(s, x0.data(), xt.data(), t, eps.data(),
                                                      eh.data(), vp.data(), n, lambda)
                                   .loss_vlb;
            const double vlm = diffusion_loss<double>(s, x0.data(), xt.data(), t, eps.data(),
                                                      eh.data(), vm.data(), n, lambda)
                                   .loss_vlb;
            const double fdv = lambda * (vlp - vlm) / (2 * h);
            CHECK(std::abs(fdv - base.d_v_raw[i]) <=
                  1e-6 * std::max(1e-8, std::abs(base.d_v_raw[i])));
        }
    }
}

TEST_CASE("training steps are deterministic") {
    auto ds = toy_dataset(2, 4, 16, 16, 41);
    auto m1 = tiny_model(42), m2 = tiny_model(42);
    auto o1 = make_optimizer("sgd", 0.02f, 0.9f);
    auto o2 = make_optimizer("sgd", 0.02f, 0.9f);
    REQUIRE(params_equal(m1.net.params, m2.net.params));

    for (int step = 0; step < 3; ++step) {
        RandomStream d1(derive_seed(43, "draw", uint64_t(step)));
        RandomStream d2(derive_seed(43, "draw", uint64_t(step)));
        auto b1 = make_batch(ds, 2, 3, 4.f, d1);
        auto b2 = make_batch(ds, 2, 3, 4.f, d2);
        RandomStream r1(derive_seed(43, "step", uint64_t(step)));
        RandomStream r2(derive_seed(43, "step", uint64_t(step)));
        auto l1 = training_step(m1, *o1, b1, 16, 16, 0.001, true, r1);
        auto l2 = training_step(m2, *o2, b2, 16, 16, 0.001, true, r2);
        CHECK(l1.total == l2.total);
        CHECK(params_equal(m1.net.params, m2.net.params));
    }

    std::vector<TrainItem> empty;
    RandomStream rs(1);
    CHECK_THROWS_AS(training_step(m1, *o1, empty, 16, 16, 0.001, true, rs),
                    std::invalid_argument);
    RandomStream d(derive_seed(43, "draw", 0));
    auto bad = make_batch(ds, 1, 3, 4.f, d);
    bad[0].x0.resize(7);
    CHECK_THROWS_AS(training_step(m1, *o1, bad, 16, 16, 0.001, true, rs),
                    std::invalid_argument);
}

TEST_CASE("repeated training steps reduce the toy loss") {
    auto ds = toy_dataset(2, 4, 16, 16, 51);
    auto m = tiny_model(52);
    auto opt = make_optimizer("sgd", 0.01f, 0.9f);

    const int steps = 200, probe = 20;
    double head = 0, tail = 0;
    for (int step = 0; step < steps; ++step) {
        RandomStream d(derive_seed(53, "draw", uint64_t(step)));
        auto b = make_batch(ds, 4, 3, 4.f, d);
        RandomStream r(derive_seed(53, "step", uint64_t(step)));
        auto l = training_step(m, *opt, b, 16, 16, 0.001, true, r);
        if (step < probe) head += l.total / probe;
        if (step >= steps - probe) tail += l.total / probe;
    }
    CAPTURE(head);
    CAPTURE(tail);
    CHECK(tail < 0.5 * head);
}

TEST_CASE("training writes logs, checkpoints, and resumes bit-exactly") {
    namespace fs = std::filesystem;
    const std::string dir_a = "test_tmp_train_a", dir_b = "test_tmp_train_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    auto ds = toy_dataset(2, 4, 16, 16, 61);
    auto val = toy_dataset(1, 4, 16, 16, 62);
    TrainConfig cfg;
    cfg.batch = 2;
    cfg.steps = 6;
    cfg.lr = 0.01f;
    cfg.n = 3;
    cfg.w0 = 4;
    cfg.w1 = 6;
    cfg.w2 = 8;
    cfg.emb_dim = 16;
    cfg.sched = ScheduleDesc{50, "linear", 1e-3, 0.04};
    cfg.seed = 63;
    cfg.log_every = 1;
    cfg.ckpt_every = 3;
    cfg.val_every = 3;
    cfg.out_dir = dir_a;

    auto full = train(ds, &val, cfg);
    REQUIRE(fs::exists(dir_a + "/train_log.csv"));
    REQUIRE(fs::exists(dir_a + "/denoiser_latest.ckpt"));
    {
        std::ifstream log(dir_a + "/train_log.csv");
        std::string line;
        REQUIRE(std::getline(log, line));
        CHECK(line == "step,loss,loss_noise,loss_vlb,lr,val_loss,val_x0_psnr");
        int rows = 0;
        while (std::getline(log, line)) ++rows;
        CHECK(rows == 6);
        auto ck = load_checkpoint(dir_a + "/denoiser_latest.ckpt");
        CHECK(ck.meta.at("train_step").get<int64_t>() == 6);
    }

    auto half_cfg = cfg;
    half_cfg.steps = 3;
    half_cfg.out_dir = dir_b;
    train(ds, &val, half_cfg);
    auto resume_cfg = cfg;
    resume_cfg.out_dir = dir_b;
    resume_cfg.resume_from = dir_b + "/denoiser_latest.ckpt";
    auto resumed = train(ds, &val, resume_cfg);
    CHECK(params_equal(full.net.params, resumed.net.params));

    auto reloaded = load_denoiser(dir_b + "/denoiser_latest.ckpt");
    CHECK(params_equal(reloaded.net.params, resumed.net.params));

    auto bad_cfg = resume_cfg;
    bad_cfg.w0 = 6;
    CHECK_THROWS_AS(train(ds, &val, bad_cfg), std::invalid_argument);

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("training aborts on divergence and keeps a last-good checkpoint") {
    namespace fs = std::filesystem;
    const std::string dir = "test_tmp_train_div";
    fs::remove_all(dir);

    auto ds = toy_dataset(1, 4, 16, 16, 71);
    TrainConfig cfg;
    cfg.batch = 2;
    cfg.steps = 50;
    cfg.lr = 1e8f;
    cfg.n = 3;
    cfg.w0 = 4;
    cfg.w1 = 6;
    cfg.w2 = 8;
    cfg.emb_dim = 16;
    cfg.sched = ScheduleDesc{50, "linear", 1e-3, 0.04};
    cfg.seed = 72;
    cfg.out_dir = dir;
    CHECK_THROWS_AS(train(ds, nullptr, cfg), std::runtime_error);
    if (fs::exists(dir + "/denoiser_diverged.ckpt")) {
        auto m = load_denoiser(dir + "/denoiser_diverged.ckpt");
        CHECK(m.n == 3);
    }
    fs::remove_all(dir);
}

TEST_CASE("invalid training configurations are rejected") {
    Dataset empty;
    TrainConfig cfg;
    cfg.steps = 1;
    CHECK_THROWS_AS(train(empty, nullptr, cfg), std::invalid_argument);
    auto ds = toy_dataset(1, 2, 8, 8, 81);
    cfg.n = 4;
    CHECK_THROWS_AS(train(ds, nullptr, cfg), std::invalid_argument);
    cfg.n = 3;
    cfg.batch = 0;
    CHECK_THROWS_AS(train(ds, nullptr, cfg), std::invalid_argument);
}
