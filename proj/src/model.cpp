#include "petdiff/model.hpp"

#include "petdiff/volume.hpp"

namespace petdiff {

using nlohmann::json;

NoiseSchedule build_schedule(const ScheduleDesc& d) {
    return make_schedule(d.T, d.kind, d.beta_start, d.beta_end);
}

json to_json(const ScheduleDesc& d) {
    return {{"T", d.T}, {"kind", d.kind}, {"beta_start", d.beta_start}, {"beta_end", d.beta_end}};
}

ScheduleDesc schedule_desc_from_json(const json& j) {
    ScheduleDesc d;
    d.T = j.at("T").get<int>();
    d.kind = j.at("kind").get<std::string>();
    d.beta_start = j.at("beta_start").get<double>();
    d.beta_end = j.at("beta_end").get<double>();
    return d;
}

json to_json(const NetConfig& c) {
    return {{"in_channels", c.in_channels}, {"out_channels", c.out_channels},
            {"w0", c.w0},                   {"w1", c.w1},
            {"w2", c.w2},                   {"emb_dim", c.emb_dim},
            {"time_input", c.time_input},   {"log_dose", c.log_dose}};
}

NetConfig net_config_from_json(const json& j) {
    NetConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    c.w0 = j.at("w0").get<int>();
    c.w1 = j.at("w1").get<int>();
    c.w2 = j.at("w2").get<int>();
    c.emb_dim = j.at("emb_dim").get<int>();
    c.time_input = j.at("time_input").get<bool>();
    c.log_dose = j.at("log_dose").get<bool>();
    return c;
}

void fill_cond_window(const Volume3D& v, int s, int n, float data_scale, float* dst) {
    const auto idx = extract_window(v, s, n);
    const size_t hw = size_t(v.ny) * v.nx;
    const float inv = 1.f / data_scale;
    for (int c = 0; c < n; ++c) {
        const float* src = v.slice(idx[size_t(c)]);
        for (size_t i = 0; i < hw; ++i) dst[size_t(c) * hw + i] = src[i] * inv;
    }
}

NetConfig denoiser_net_config(int n, int w0, int w1, int w2, int emb_dim) {
    NetConfig c;
    c.in_channels = 1 + n;  // current sample plus conditioning window
    c.out_channels = 2;     // noise estimate and variance channel
    c.w0 = w0;
    c.w1 = w1;
    c.w2 = w2;
    c.emb_dim = emb_dim;
    c.time_input = true;
    return c;
}

NetConfig prior_net_config(int n, int w0, int w1, int w2, int emb_dim) {
    NetConfig c;
    c.in_channels = n;
    c.out_channels = 1;
    c.w0 = w0;
    c.w1 = w1;
    c.w2 = w2;
    c.emb_dim = emb_dim;
    c.time_input = false;  // regression model, dose conditioning only
    return c;
}

DenoiserModel make_denoiser(const NetConfig& c, int n, float data_scale, const ScheduleDesc& d) {
    if (c.in_channels != 1 + n || c.out_channels != 2 || !c.time_input)
        throw std::invalid_argument("make_denoiser: config incompatible with window size");
    return DenoiserModel{UNet2Df(c), n, data_scale, d, build_schedule(d)};
}

PriorModel make_prior(const NetConfig& c, int n, float data_scale) {
    if (c.in_channels != n || c.out_channels != 1 || c.time_input)
        throw std::invalid_argument("make_prior: config incompatible with window size");
    return PriorModel{UNet2Df(c), n, data_scale};
}

namespace {

Checkpoint base_checkpoint(const std::string& kind, const NetConfig& net_cfg, int n,
                           float data_scale, int64_t train_step, const ParamStore<float>& params,
                           const std::vector<NamedTensor<float>>& extra) {
    Checkpoint ckpt;
    ckpt.meta["kind"] = kind;
    ckpt.meta["net"] = to_json(net_cfg);
    ckpt.meta["n"] = n;
    ckpt.meta["data_scale"] = data_scale;
    ckpt.meta["train_step"] = train_step;
    pack_arrays(ckpt, params, "net.");
    for (const auto& a : extra) ckpt.arrays.push_back(a);
    return ckpt;
}

void check_kind(const Checkpoint& ckpt, const std::string& want) {
    const std::string got = ckpt.meta.value("kind", "");
    if (got != want)
        throw format_error("checkpoint kind is '" + got + "', expected '" + want + "'");
}

}  // namespace

void save_denoiser(const std::string& path, const DenoiserModel& m, int64_t train_step,
                   const std::vector<NamedTensor<float>>& extra_arrays) {
    auto ckpt = base_checkpoint("denoiser", m.net.cfg, m.n, m.data_scale, train_step,
                                m.net.params, extra_arrays);
    ckpt.meta["schedule"] = to_json(m.sched_desc);
    save_checkpoint(path, ckpt);
}

DenoiserModel load_denoiser(const std::string& path) {
    auto ckpt = load_checkpoint(path);
    check_kind(ckpt, "denoiser");
    auto m = make_denoiser(net_config_from_json(ckpt.meta.at("net")), ckpt.meta.at("n").get<int>(),
                           ckpt.meta.at("data_scale").get<float>(),
                           schedule_desc_from_json(ckpt.meta.at("schedule")));
    unpack_arrays(ckpt, m.net.params, "net.");
    return m;
}

void save_prior(const std::string& path, const PriorModel& m, int64_t train_step,
                const std::vector<NamedTensor<float>>& extra_arrays) {
    auto ckpt = base_checkpoint("prior", m.net.cfg, m.n, m.data_scale, train_step, m.net.params,
                                extra_arrays);
    save_checkpoint(path, ckpt);
}

PriorModel load_prior(const std::string& path) {
    auto ckpt = load_checkpoint(path);
    check_kind(ckpt, "prior");
    auto m = make_prior(net_config_from_json(ckpt.meta.at("net")), ckpt.meta.at("n").get<int>(),
                        ckpt.meta.at("data_scale").get<float>());
    unpack_arrays(ckpt, m.net.params, "net.");
    return m;
}

}  // namespace petdiff
