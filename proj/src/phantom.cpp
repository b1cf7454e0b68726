#include "petdiff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace petdiff {

namespace {

bool inside(const Ellipsoid& e, double s, double y, double x) {
    const double ds = (s - e.cs) / e.rs, dy = (y - e.cy) / e.ry, dx = (x - e.cx) / e.rx;
    return ds * ds + dy * dy + dx * dx <= 1.0;
}

void check_bounds(double c, double r, int n, const char* what) {
    if (r <= 0) throw std::invalid_argument(std::string("generate_phantom: non-positive ") +
                                            what + " radius");
    if (c - r < 0 || c + r > double(n - 1))
        throw std::invalid_argument(std::string("generate_phantom: ") + what + " out of bounds");
}

double level_at(const PhantomSpec& spec, double s, double y, double x) {
    double v = spec.background;
    for (const auto& o : spec.organs)
        if (inside(o, s, y, x)) v += o.activity;
    return v;
}

}  // namespace

Volume3D generate_phantom(const PhantomSpec& spec) {
    if (spec.background < 0)
        throw std::invalid_argument("generate_phantom: negative background");
    for (const auto& o : spec.organs) {
        if (o.activity < 0) throw std::invalid_argument("generate_phantom: negative activity");
        check_bounds(o.cs, o.rs, spec.ns, "organ");
        check_bounds(o.cy, o.ry, spec.ny, "organ");
        check_bounds(o.cx, o.rx, spec.nx, "organ");
    }
    for (const auto& l : spec.lesions) {
        if (l.contrast < 1)
            throw std::invalid_argument("generate_phantom: lesion contrast must be >= 1");
        check_bounds(l.cs, l.radius, spec.ns, "lesion");
        check_bounds(l.cy, l.radius, spec.ny, "lesion");
        check_bounds(l.cx, l.radius, spec.nx, "lesion");
    }

    Volume3D v(spec.ns, spec.ny, spec.nx, float(spec.background));
    for (const auto& o : spec.organs) {
        const int s0 = int(std::ceil(o.cs - o.rs)), s1 = int(std::floor(o.cs + o.rs));
        const int y0 = int(std::ceil(o.cy - o.ry)), y1 = int(std::floor(o.cy + o.ry));
        const int x0 = int(std::ceil(o.cx - o.rx)), x1 = int(std::floor(o.cx + o.rx));
        for (int s = s0; s <= s1; ++s)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (inside(o, s, y, x)) v.at(s, y, x) += float(o.activity);
    }
    for (const auto& l : spec.lesions) {
        const double add = (l.contrast - 1.0) * level_at(spec, l.cs, l.cy, l.cx);
        const Ellipsoid sp{l.cs, l.cy, l.cx, l.radius, l.radius, l.radius, add};
        const int s0 = int(std::ceil(l.cs - l.radius)), s1 = int(std::floor(l.cs + l.radius));
        const int y0 = int(std::ceil(l.cy - l.radius)), y1 = int(std::floor(l.cy + l.radius));
        const int x0 = int(std::ceil(l.cx - l.radius)), x1 = int(std::floor(l.cx + l.radius));
        for (int s = s0; s <= s1; ++s)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (inside(sp, s, y, x)) v.at(s, y, x) += float(add);
    }

    RandomStream dose(derive_seed(spec.seed, "dose"));
    v.meta.dose_bq = dose.uniform_range(spec.dose_lo, spec.dose_hi);
    v.meta.count_fraction = 1.0;
    v.meta.id = spec.id;
    return v;
}

PhantomSpec random_phantom_spec(int dim, uint64_t seed, const std::string& id) {
    if (dim < 16) throw std::invalid_argument("random_phantom_spec: dim must be >= 16");
    PhantomSpec spec;
    spec.ns = spec.ny = spec.nx = dim;
    spec.seed = seed;
    spec.id = id;

    RandomStream rs(derive_seed(seed, "spec"));
    const double c = 0.5 * (dim - 1);
    Ellipsoid body;
    body.cs = c + dim * rs.uniform_range(-0.02, 0.02);
    body.cy = c + dim * rs.uniform_range(-0.02, 0.02);
    body.cx = c + dim * rs.uniform_range(-0.02, 0.02);
    body.rs = dim * rs.uniform_range(0.30, 0.40);
    body.ry = dim * rs.uniform_range(0.30, 0.40);
    body.rx = dim * rs.uniform_range(0.30, 0.40);
    body.activity = 1.0;
    spec.organs.push_back(body);

    // offsets shrink with the shape's own radius, keeping every shape inside
    // the body and therefore inside the volume
    auto place = [&](double bc, double br, double r, double span) {
        return bc + rs.uniform_range(-span, span) * std::max(0.0, br - r - 1.0);
    };

    const int n_organs = 2 + int(rs.index(2));
    for (int k = 0; k < n_organs; ++k) {
        Ellipsoid o;
        o.rs = dim * rs.uniform_range(0.06, 0.14);
        o.ry = dim * rs.uniform_range(0.06, 0.14);
        o.rx = dim * rs.uniform_range(0.06, 0.14);
        o.cs = place(body.cs, body.rs, o.rs, 0.5);
        o.cy = place(body.cy, body.ry, o.ry, 0.5);
        o.cx = place(body.cx, body.rx, o.rx, 0.5);
        o.activity = rs.uniform_range(0.2, 1.0);
        spec.organs.push_back(o);
    }

    const int n_lesions = 1 + int(rs.index(3));
    for (int k = 0; k < n_lesions; ++k) {
        Lesion l;
        l.radius = rs.uniform_range(2.0, 4.5);
        l.cs = place(body.cs, body.rs, l.radius, 0.6);
        l.cy = place(body.cy, body.ry, l.radius, 0.6);
        l.cx = place(body.cx, body.rx, l.radius, 0.6);
        l.contrast = rs.uniform_range(3.0, 8.0);
        spec.lesions.push_back(l);
    }
    return spec;
}

Volume3D simulate_low_count(const Volume3D& v, double fraction, double events_per_unit,
                            RandomStream& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("simulate_low_count: fraction must be in (0, 1]");
    if (!(events_per_unit > 0.0))
        throw std::invalid_argument("simulate_low_count: events_per_unit must be > 0");

    const double scale = events_per_unit * fraction;
    Volume3D out = v;
    for (size_t i = 0; i < v.data.size(); ++i)
        out.data[i] = float(double(rng.poisson(double(v.data[i]) * scale)) / scale);
    out.meta.count_fraction = fraction;
    out.meta.dose_bq = v.meta.dose_bq * fraction;
    return out;
}

std::string build_dataset(const std::string& out_dir, const BuildDataConfig& cfg) {
    if (cfg.num_phantoms < 1)
        throw std::invalid_argument("build_dataset: need at least one phantom");
    if (cfg.fractions.empty())
        throw std::invalid_argument("build_dataset: need at least one fraction");
    if (cfg.train_frac < 0 || cfg.val_frac < 0 || cfg.train_frac + cfg.val_frac > 1.0)
        throw std::invalid_argument("build_dataset: bad split fractions");

    std::vector<int> permille;
    for (double f : cfg.fractions) {
        if (!(f > 0.0 && f <= 1.0))
            throw std::invalid_argument("build_dataset: fractions must be in (0, 1]");
        permille.push_back(int(std::llround(f * 1000.0)));
    }
    for (size_t i = 0; i < permille.size(); ++i)
        for (size_t j = i + 1; j < permille.size(); ++j)
            if (permille[i] == permille[j])
                throw std::invalid_argument("build_dataset: duplicate fraction");

    std::filesystem::create_directories(out_dir);
    const int n_train = int(std::llround(cfg.num_phantoms * cfg.train_frac));
    const int n_val =
        std::min(int(std::llround(cfg.num_phantoms * cfg.val_frac)), cfg.num_phantoms - n_train);

    std::vector<nlohmann::json> entries(size_t(cfg.num_phantoms));
    std::string err;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
        num_threads(cfg.threads > 0 ? cfg.threads : omp_get_max_threads())
#endif
    for (int k = 0; k < cfg.num_phantoms; ++k) {
        try {
            char name[32];
            std::snprintf(name, sizeof name, "ph%03d", k);
            auto spec = random_phantom_spec(cfg.dim, derive_seed(cfg.seed, "phantom", uint64_t(k)),
                                            name);
            auto full = generate_phantom(spec);
            const std::string full_file = std::string(name) + "_full.vol";
            save_volume(out_dir + "/" + full_file, full);

            nlohmann::json low = nlohmann::json::array();
            for (size_t j = 0; j < cfg.fractions.size(); ++j) {
                RandomStream rng(
                    derive_seed(cfg.seed, "sim", uint64_t(k), uint64_t(permille[j])));
                auto lv = simulate_low_count(full, cfg.fractions[j], cfg.events_per_unit, rng);
                char lf[48];
                std::snprintf(lf, sizeof lf, "%s_f%03d.vol", name, permille[j]);
                save_volume(out_dir + "/" + lf, lv);
                low.push_back({{"fraction", cfg.fractions[j]}, {"path", lf}});
            }
            const char* split = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
            entries[size_t(k)] = {
                {"id", name}, {"split", split}, {"full", full_file}, {"low", low}};
        } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (err.empty()) err = e.what();
        }
    }
    if (!err.empty()) throw format_error("build_dataset: " + err);

    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["studies"] = entries;
    const std::string path = out_dir + "/manifest.json";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw format_error("build_dataset: cannot write " + path);
    f << manifest.dump(2) << '\n';
    return path;
}

}  // namespace petdiff
