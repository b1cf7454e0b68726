#pragma once

#include <string>
#include <vector>

#include "petdiff/dataset.hpp"
#include "petdiff/model.hpp"
#include "petdiff/optim.hpp"

namespace petdiff {

// Hybrid objective: mean squared noise error plus lambda times a variance
// term (KL to the forward posterior for t >= 2, Gaussian likelihood at t = 1),
// with the mean's noise estimate treated as constant inside the variance term.
template <class S>
struct DiffusionLossTerms {
    double loss_noise = 0, loss_vlb = 0;
    std::vector<S> d_eps_hat, d_v_raw;
};

template <class S>
DiffusionLossTerms<S> diffusion_loss(const NoiseSchedule& sched, const S* x0, const S* x_t, int t,
                                     const S* eps, const S* eps_hat, const S* v_raw, size_t npix,
                                     double lambda);

struct TrainConfig {
    int batch = 8;
    int steps = 3000;
    float lr = 0.02f;
    float momentum = 0.9f;
    std::string optimizer = "sgd";
    std::string lr_decay = "none";  // none | cosine
    int n = 9;
    int w0 = 8, w1 = 12, w2 = 16, emb_dim = 64;
    ScheduleDesc sched;
    uint64_t seed = 1;
    bool dose_embedding = true;  // off: dose input forced to zero
    double lambda_vlb = 0.001;
    float data_scale = 4.0f;
    int log_every = 25;
    int ckpt_every = 500;
    int val_every = 250;
    std::string out_dir;      // checkpoint + csv destination; empty for none
    std::string resume_from;  // checkpoint path; empty trains from scratch
};

struct StepLosses {
    double total = 0, noise = 0, vlb = 0;
};

struct TrainItem {
    std::vector<float> x0;    // [h*w] central slice in network units
    std::vector<float> cond;  // [n*h*w] window in network units
    double dose_bq = 0;
};

// one optimizer update; samples t and eps per item from rs
StepLosses training_step(DenoiserModel& m, Optimizer& opt, const std::vector<TrainItem>& batch,
                         int h, int w, double lambda, bool dose_embedding, RandomStream& rs);

DenoiserModel train(const Dataset& train_ds, const Dataset* val_ds, const TrainConfig& cfg);

}  // namespace petdiff
