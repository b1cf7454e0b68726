#pragma once

#include <string>

#include <json.hpp>

#include "petdiff/checkpoint.hpp"
#include "petdiff/net.hpp"
#include "petdiff/schedule.hpp"
#include "petdiff/volume.hpp"

namespace petdiff {

// Serializable description of a noise schedule (the table itself is rebuilt).
struct ScheduleDesc {
    int T = 1000;
    std::string kind = "linear";
    double beta_start = 1e-4, beta_end = 0.02;
};

NoiseSchedule build_schedule(const ScheduleDesc& d);

nlohmann::json to_json(const ScheduleDesc& d);
ScheduleDesc schedule_desc_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

// Diffusion denoiser: input [x_t | n-slice window], output [eps_hat, v_raw].
struct DenoiserModel {
    UNet2Df net;
    int n = 9;
    float data_scale = 4.0f;
    ScheduleDesc sched_desc;
    NoiseSchedule sched;
};

// Direct regression denoiser: input [n-slice window], output [x0_hat].
struct PriorModel {
    UNet2Df net;
    int n = 9;
    float data_scale = 4.0f;
};

// n clamped window slices around s, scaled by 1/data_scale, into dst[n*ny*nx]
void fill_cond_window(const Volume3D& v, int s, int n, float data_scale, float* dst);

NetConfig denoiser_net_config(int n, int w0 = 8, int w1 = 12, int w2 = 16, int emb_dim = 64);
NetConfig prior_net_config(int n, int w0 = 8, int w1 = 12, int w2 = 16, int emb_dim = 64);

DenoiserModel make_denoiser(const NetConfig& c, int n, float data_scale, const ScheduleDesc& d);
PriorModel make_prior(const NetConfig& c, int n, float data_scale);

// extra_arrays carries optimizer state on training checkpoints; load ignores it
void save_denoiser(const std::string& path, const DenoiserModel& m, int64_t train_step,
                   const std::vector<NamedTensor<float>>& extra_arrays = {});
DenoiserModel load_denoiser(const std::string& path);
void save_prior(const std::string& path, const PriorModel& m, int64_t train_step,
                const std::vector<NamedTensor<float>>& extra_arrays = {});
PriorModel load_prior(const std::string& path);

}  // namespace petdiff
