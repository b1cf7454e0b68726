#pragma once

#include <string>

#include "petdiff/dataset.hpp"
#include "petdiff/model.hpp"

namespace petdiff {

struct PriorTrainConfig {
    int n = 9;
    float data_scale = 4.0f;
    int w0 = 8, w1 = 12, w2 = 16, emb_dim = 64;
    int steps = 2000;
    int batch = 8;
    float lr = 0.05f;
    float momentum = 0.9f;
    std::string optimizer = "sgd";
    std::string lr_decay = "none";  // none | cosine
    uint64_t seed = 1;
    int log_every = 50;
};

// MSE regression from low-count window to full-count central slice;
// log_csv empty -> no log file
PriorModel train_prior(const Dataset& ds, const PriorTrainConfig& cfg,
                       const std::string& log_csv = "");

Volume3D denoise_prior(const PriorModel& m, const Volume3D& v_noisy);

}  // namespace petdiff
