#include "petdiff/config.hpp"

#include <fstream>
#include <stdexcept>

#include "petdiff/volume.hpp"

namespace petdiff {

using nlohmann::json;

json default_config() {
    return json{
        {"seed", 1},
        {"threads", 0},
        {"data",
         {{"num_phantoms", 20},
          {"fractions", {0.01, 0.02, 0.05, 0.10, 0.25, 0.50}},
          {"dim", 64},
          {"events_per_unit", 250.0},
          {"train_frac", 0.4},
          {"val_frac", 0.1}}},
        {"schedule",
         {{"T", 1000}, {"kind", "linear"}, {"beta_start", 1e-4}, {"beta_end", 0.02}}},
        {"model",
         {{"n", 9}, {"w0", 8}, {"w1", 12}, {"w2", 16}, {"emb_dim", 64}, {"data_scale", 4.0}}},
        {"train",
         {{"batch", 8},
          {"steps", 3000},
          {"lr", 0.02},
          {"momentum", 0.9},
          {"optimizer", "sgd"},
          {"lr_decay", "none"},
          {"lambda_vlb", 0.001},
          {"dose_embedding", true},
          {"log_every", 25},
          {"ckpt_every", 500},
          {"val_every", 250}}},
        {"prior",
         {{"steps", 2000},
          {"batch", 8},
          {"lr", 0.05},
          {"momentum", 0.9},
          {"optimizer", "sgd"},
          {"lr_decay", "none"},
          {"log_every", 50}}},
        {"sample", {{"t_prime", 250}, {"num_steps", 25}, {"interleave_period", 5}}},
    };
}

namespace {

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

}  // namespace

void merge_config(json& base, const json& overlay, const std::string& where) {
    if (!overlay.is_object())
        throw std::invalid_argument("config: expected an object at '" + where + "'");
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key()))
            throw std::invalid_argument("config: unknown key '" + path + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_config(slot, it.value(), path);
        } else {
            if (!same_kind(slot, it.value()))
                throw std::invalid_argument("config: type mismatch at '" + path + "' (expected " +
                                            std::string(slot.type_name()) + ")");
            slot = it.value();
        }
    }
}

json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw format_error("config: cannot open " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw format_error("config: " + path + ": " + e.what());
    }
    return j;
}

void set_config_value(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("config: expected key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* slot = &cfg;
    size_t pos = 0;
    std::string walked;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        walked = walked.empty() ? key : walked + "." + key;
        if (!slot->is_object() || !slot->contains(key))
            throw std::invalid_argument("config: unknown key '" + walked + "'");
        slot = &(*slot)[key];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    if (slot->is_object())
        throw std::invalid_argument("config: '" + path + "' is a section, not a value");
    if (!same_kind(*slot, value))
        throw std::invalid_argument("config: type mismatch at '" + path + "' (expected " +
                                    std::string(slot->type_name()) + ")");
    *slot = value;
}

}  // namespace petdiff
