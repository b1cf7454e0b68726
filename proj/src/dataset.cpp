#include "petdiff/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace petdiff {

using nlohmann::json;

DrawnSample draw_sample(const Dataset& d, RandomStream& rs) {
    if (d.studies.empty()) throw std::invalid_argument("draw_sample: empty dataset");
    const Study& st = d.studies[rs.index(d.studies.size())];
    if (st.low.empty()) throw std::invalid_argument("draw_sample: study without low-count data");
    const Volume3D& low = st.low[rs.index(st.low.size())];
    DrawnSample out;
    out.low = &low;
    out.full = &st.full;
    out.s = int(rs.index(size_t(st.full.ns)));
    return out;
}

Dataset load_dataset(const std::string& manifest_path, const std::string& split) {
    if (split != "train" && split != "val" && split != "test" && split != "all")
        throw std::invalid_argument("load_dataset: unknown split " + split);

    std::ifstream f(manifest_path);
    if (!f) throw format_error("load_dataset: cannot open " + manifest_path);
    json m;
    try {
        m = json::parse(f);
    } catch (const json::exception& e) {
        throw format_error("load_dataset: bad manifest JSON: " + std::string(e.what()));
    }

    const auto dir = std::filesystem::path(manifest_path).parent_path();
    Dataset out;
    try {
        if (m.at("version").get<int>() != 1)
            throw format_error("load_dataset: unsupported manifest version");
        for (const auto& js : m.at("studies")) {
            if (split != "all" && js.at("split").get<std::string>() != split) continue;
            Study st;
            st.id = js.at("id").get<std::string>();
            st.full = load_volume((dir / js.at("full").get<std::string>()).string());
            for (const auto& jl : js.at("low")) {
                auto v = load_volume((dir / jl.at("path").get<std::string>()).string());
                if (v.ns != st.full.ns || v.ny != st.full.ny || v.nx != st.full.nx)
                    throw format_error("load_dataset: dims mismatch in study " + st.id);
                st.low.push_back(std::move(v));
            }
            if (st.low.empty()) throw format_error("load_dataset: study " + st.id + " has no low-count volumes");
            out.studies.push_back(std::move(st));
        }
    } catch (const json::exception& e) {
        throw format_error("load_dataset: bad manifest field: " + std::string(e.what()));
    }
    if (out.studies.empty())
        throw format_error("load_dataset: no studies in split " + split);
    return out;
}

}  // namespace petdiff
