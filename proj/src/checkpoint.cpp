#include "petdiff/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "petdiff/volume.hpp"

namespace petdiff {

using nlohmann::json;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json dir = json::array();
    for (const auto& a : ckpt.arrays) {
        size_t want = 1;
        for (int d : a.shape) want *= size_t(d);
        if (want != a.v.size())
            throw std::invalid_argument("save_checkpoint: shape mismatch for " + a.name);
        for (float x : a.v)
            if (!std::isfinite(x))
                throw std::invalid_argument("save_checkpoint: non-finite value in " + a.name);
        dir.push_back({{"name", a.name}, {"shape", a.shape}});
    }

    json h;
    h["format"] = "checkpoint";
    h["version"] = 1;
    h["byte_order"] = "LE";
    h["scalar_bits"] = 32;
    h["meta"] = ckpt.meta;
    h["arrays"] = dir;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw format_error("save_checkpoint: cannot open " + path);
    f << h.dump() << '\n';
    for (const auto& a : ckpt.arrays)
        f.write(reinterpret_cast<const char*>(a.v.data()),
                std::streamsize(a.v.size() * sizeof(float)));
    if (!f) throw format_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw format_error("load_checkpoint: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw format_error("load_checkpoint: missing header");

    json h;
    try {
        h = json::parse(header);
    } catch (const json::exception& e) {
        throw format_error("load_checkpoint: bad header JSON: " + std::string(e.what()));
    }
    try {
        if (h.at("format").get<std::string>() != "checkpoint")
            throw format_error("load_checkpoint: not a checkpoint file");
        if (h.at("version").get<int>() != 1)
            throw format_error("load_checkpoint: unsupported version");
        if (h.at("byte_order").get<std::string>() != "LE")
            throw format_error("load_checkpoint: unsupported byte order");
        if (h.at("scalar_bits").get<int>() != 32)
            throw format_error("load_checkpoint: unsupported scalar width");

        Checkpoint ckpt;
        ckpt.meta = h.value("meta", json::object());
        for (const auto& d : h.at("arrays")) {
            NamedTensor<float> a;
            a.name = d.at("name").get<std::string>();
            a.shape = d.at("shape").get<std::vector<int>>();
            size_t want = 1;
            for (int s : a.shape) {
                if (s <= 0) throw format_error("load_checkpoint: bad shape for " + a.name);
                want *= size_t(s);
            }
            a.v.resize(want);
            f.read(reinterpret_cast<char*>(a.v.data()), std::streamsize(want * sizeof(float)));
            if (size_t(f.gcount()) != want * sizeof(float))
                throw format_error("load_checkpoint: truncated payload in " + path);
            for (float x : a.v)
                if (!std::isfinite(x))
                    throw format_error("load_checkpoint: non-finite value in " + a.name);
            ckpt.arrays.push_back(std::move(a));
        }
        char extra;
        if (f.read(&extra, 1)) throw format_error("load_checkpoint: trailing bytes in " + path);
        return ckpt;
    } catch (const json::exception& e) {
        throw format_error("load_checkpoint: bad header field: " + std::string(e.what()));
    }
}

void pack_arrays(Checkpoint& ckpt, const ParamStore<float>& p, const std::string& prefix) {
    for (const auto& a : p.t) {
        NamedTensor<float> out = a;
        out.name = prefix + a.name;
        ckpt.arrays.push_back(std::move(out));
    }
}

void unpack_arrays(const Checkpoint& ckpt, ParamStore<float>& p, const std::string& prefix) {
    for (auto& a : p.t) {
        const std::string want = prefix + a.name;
        bool found = false;
        for (const auto& c : ckpt.arrays) {
            if (c.name != want) continue;
            if (c.shape != a.shape)
                throw format_error("unpack_arrays: shape mismatch for " + want);
            a.v = c.v;
            found = true;
            break;
        }
        if (!found) throw format_error("unpack_arrays: missing array " + want);
    }
}

}  // namespace petdiff
