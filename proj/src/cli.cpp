#include "petdiff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "petdiff/config.hpp"
#include "petdiff/dataset.hpp"
#include "petdiff/metrics.hpp"
#include "petdiff/model.hpp"
#include "petdiff/phantom.hpp"
#include "petdiff/png.hpp"
#include "petdiff/prior.hpp"
#include "petdiff/sampler.hpp"
#include "petdiff/trainer.hpp"

namespace petdiff {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw format_error("hash: cannot open " + path);
    uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        const auto* p = reinterpret_cast<const unsigned char*>(buf);
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

namespace {

std::string hex64(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_run_manifest(const std::string& path, const std::string& command,
                        const std::vector<std::string>& argv, const json& cfg,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = "petdiff";
    m["format_versions"] = {{"volume", 1}, {"checkpoint", 1}, {"run_manifest", 1}};
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = cfg;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = hex64(fnv1a64_file(p));
    for (const auto& p : outputs) out[p] = hex64(fnv1a64_file(p));
    m["inputs"] = in;
    m["outputs"] = out;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw format_error("run manifest: cannot open " + path);
    f << m.dump(2) << "\n";
    if (!f) throw format_error("run manifest: write failed for " + path);
}

// volume files a split references, for input fingerprinting
std::vector<std::string> split_files(const std::string& manifest_path, const std::string& split) {
    std::ifstream f(manifest_path);
    if (!f) throw format_error("split_files: cannot open " + manifest_path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw format_error("split_files: bad JSON in " + manifest_path);
    const auto dir = fs::path(manifest_path).parent_path();
    std::vector<std::string> out;
    for (const auto& js : j.at("studies")) {
        if (split != "all" && js.at("split").get<std::string>() != split) continue;
        out.push_back((dir / js.at("full").get<std::string>()).string());
        for (const auto& jl : js.at("low")) out.push_back((dir / jl.at("path").get<std::string>()).string());
    }
    return out;
}

struct FlagBinding {
    CLI::Option* opt = nullptr;
    std::string path;
    enum { INT, DBL, STR, U64 } kind = INT;
    int i = 0;
    double d = 0;
    std::string s;
    uint64_t u = 0;
};

// flags beat --set entries, which beat the config file, which beats defaults
struct ConfigLayer {
    std::string config_file;
    std::vector<std::string> sets;
    std::deque<FlagBinding> flags;  // stable addresses; the parser binds into them

    void add_common(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file merged over built-in defaults");
        cmd->add_option("--set", sets, "override a config entry, e.g. --set sample.num_steps=30");
        bind(cmd, "--seed", "seed", FlagBinding::U64, "root seed for this run");
        bind(cmd, "--threads", "threads", FlagBinding::INT, "worker threads (0 = runtime default)");
    }

    void bind(CLI::App* cmd, const std::string& flag, const std::string& path, int kind,
              const std::string& help) {
        flags.emplace_back();
        auto& b = flags.back();
        b.path = path;
        b.kind = decltype(b.kind)(kind);
        switch (b.kind) {
            case FlagBinding::INT: b.opt = cmd->add_option(flag, b.i, help); break;
            case FlagBinding::DBL: b.opt = cmd->add_option(flag, b.d, help); break;
            case FlagBinding::STR: b.opt = cmd->add_option(flag, b.s, help); break;
            case FlagBinding::U64: b.opt = cmd->add_option(flag, b.u, help); break;
        }
    }

    json resolve() const {
        json cfg = default_config();
        if (!config_file.empty()) merge_config(cfg, load_config_file(config_file), "");
        for (const auto& a : sets) set_config_value(cfg, a);
        for (const auto& b : flags) {
            if (!b.opt->count()) continue;
            char num[32];
            switch (b.kind) {
                case FlagBinding::INT:
                    set_config_value(cfg, b.path + "=" + std::to_string(b.i));
                    break;
                case FlagBinding::DBL:
                    std::snprintf(num, sizeof num, "%.17g", b.d);
                    set_config_value(cfg, b.path + "=" + num);
                    break;
                case FlagBinding::STR:
                    set_config_value(cfg, b.path + "=" + b.s);
                    break;
                case FlagBinding::U64:
                    set_config_value(cfg, b.path + "=" + std::to_string(b.u));
                    break;
            }
        }
        return cfg;
    }
};

SampleConfig sample_config_from(const json& cfg, int n) {
    SampleConfig sc;
    sc.t_prime = cfg["sample"]["t_prime"].get<int>();
    sc.num_steps = cfg["sample"]["num_steps"].get<int>();
    sc.interleave_period = cfg["sample"]["interleave_period"].get<int>();
    sc.n = n;
    sc.seed = cfg["seed"].get<uint64_t>();
    sc.threads = cfg["threads"].get<int>();
    return sc;
}

TrainConfig train_config_from(const json& cfg) {
    TrainConfig tc;
    tc.batch = cfg["train"]["batch"].get<int>();
    tc.steps = cfg["train"]["steps"].get<int>();
    tc.lr = cfg["train"]["lr"].get<float>();
    tc.momentum = cfg["train"]["momentum"].get<float>();
    tc.optimizer = cfg["train"]["optimizer"].get<std::string>();
    tc.lr_decay = cfg["train"]["lr_decay"].get<std::string>();
    tc.n = cfg["model"]["n"].get<int>();
    tc.w0 = cfg["model"]["w0"].get<int>();
    tc.w1 = cfg["model"]["w1"].get<int>();
    tc.w2 = cfg["model"]["w2"].get<int>();
    tc.emb_dim = cfg["model"]["emb_dim"].get<int>();
    tc.sched.T = cfg["schedule"]["T"].get<int>();
    tc.sched.kind = cfg["schedule"]["kind"].get<std::string>();
    tc.sched.beta_start = cfg["schedule"]["beta_start"].get<double>();
    tc.sched.beta_end = cfg["schedule"]["beta_end"].get<double>();
    tc.seed = cfg["seed"].get<uint64_t>();
    tc.dose_embedding = cfg["train"]["dose_embedding"].get<bool>();
    tc.lambda_vlb = cfg["train"]["lambda_vlb"].get<double>();
    tc.data_scale = cfg["model"]["data_scale"].get<float>();
    tc.log_every = cfg["train"]["log_every"].get<int>();
    tc.ckpt_every = cfg["train"]["ckpt_every"].get<int>();
    tc.val_every = cfg["train"]["val_every"].get<int>();
    return tc;
}

int cmd_gen_data(const json& cfg, const std::string& out_dir,
                 const std::vector<std::string>& argv) {
    BuildDataConfig b;
    b.num_phantoms = cfg["data"]["num_phantoms"].get<int>();
    b.fractions = cfg["data"]["fractions"].get<std::vector<double>>();
    b.dim = cfg["data"]["dim"].get<int>();
    b.events_per_unit = cfg["data"]["events_per_unit"].get<double>();
    b.train_frac = cfg["data"]["train_frac"].get<double>();
    b.val_frac = cfg["data"]["val_frac"].get<double>();
    b.seed = cfg["seed"].get<uint64_t>();
    b.threads = cfg["threads"].get<int>();

    const std::string manifest = build_dataset(out_dir, b);
    std::vector<std::string> outputs = {manifest};
    for (const auto& p : split_files(manifest, "all")) outputs.push_back(p);
    write_run_manifest(out_dir + "/run_manifest.json", "gen-data", argv, cfg, {}, outputs);
    std::printf("gen-data: %d phantoms, %zu fractions -> %s\n", b.num_phantoms,
                b.fractions.size(), manifest.c_str());
    return 0;
}

int cmd_train_prior(const json& cfg, const std::string& data, const std::string& out_dir,
                    const std::vector<std::string>& argv) {
    const auto tr = load_dataset(data, "train");
    PriorTrainConfig pc;
    pc.n = cfg["model"]["n"].get<int>();
    pc.data_scale = cfg["model"]["data_scale"].get<float>();
    pc.w0 = cfg["model"]["w0"].get<int>();
    pc.w1 = cfg["model"]["w1"].get<int>();
    pc.w2 = cfg["model"]["w2"].get<int>();
    pc.emb_dim = cfg["model"]["emb_dim"].get<int>();
    pc.steps = cfg["prior"]["steps"].get<int>();
    pc.batch = cfg["prior"]["batch"].get<int>();
    pc.lr = cfg["prior"]["lr"].get<float>();
    pc.momentum = cfg["prior"]["momentum"].get<float>();
    pc.optimizer = cfg["prior"]["optimizer"].get<std::string>();
    pc.lr_decay = cfg["prior"]["lr_decay"].get<std::string>();
    pc.seed = cfg["seed"].get<uint64_t>();
    pc.log_every = cfg["prior"]["log_every"].get<int>();

    fs::create_directories(out_dir);
    const std::string log = out_dir + "/prior_log.csv";
    const std::string ckpt = out_dir + "/prior_latest.ckpt";
    auto m = train_prior(tr, pc, log);
    save_prior(ckpt, m, pc.steps);

    std::vector<std::string> inputs = {data};
    for (const auto& p : split_files(data, "train")) inputs.push_back(p);
    write_run_manifest(out_dir + "/run_manifest.json", "train-prior", argv, cfg, inputs,
                       {ckpt, log});
    std::printf("train-prior: %d steps -> %s\n", pc.steps, ckpt.c_str());
    return 0;
}

int cmd_train(const json& cfg, const std::string& data, const std::string& out_dir,
              const std::string& resume, const std::vector<std::string>& argv) {
    const auto tr = load_dataset(data, "train");
    Dataset val;
    bool have_val = true;
    try {
        val = load_dataset(data, "val");
    } catch (const format_error&) {
        have_val = false;
        std::printf("train: no val split, skipping validation\n");
    }

    TrainConfig tc = train_config_from(cfg);
    tc.out_dir = out_dir;
    tc.resume_from = resume;
    train(tr, have_val ? &val : nullptr, tc);

    std::vector<std::string> inputs = {data};
    for (const auto& p : split_files(data, "train")) inputs.push_back(p);
    if (have_val)
        for (const auto& p : split_files(data, "val")) inputs.push_back(p);
    if (!resume.empty()) inputs.push_back(resume);
    write_run_manifest(out_dir + "/run_manifest.json", "train", argv, cfg, inputs,
                       {out_dir + "/denoiser_latest.ckpt", out_dir + "/train_log.csv"});
    std::printf("train: %d steps -> %s/denoiser_latest.ckpt\n", tc.steps, out_dir.c_str());
    return 0;
}

void apply_ablation(SampleConfig& sc, const std::string& name) {
    if (name == "no_prior")
        sc.no_prior = true;
    else if (name == "no_fix_eps")
        sc.no_fix_eps = true;
    else if (name == "single_eps")
        sc.single_eps = true;
    else if (name == "no_dose")
        sc.no_dose = true;
    else
        throw std::invalid_argument("unknown ablation '" + name + "'");
}

int cmd_denoise(const json& cfg, const std::string& ckpt, const std::string& prior_ckpt,
                const std::string& input, const std::string& out, const std::string& ablation,
                const std::vector<std::string>& argv) {
    const auto den = load_denoiser(ckpt);
    std::optional<PriorModel> pm;
    if (!prior_ckpt.empty()) pm = load_prior(prior_ckpt);
    const auto vin = load_volume(input);

    SampleConfig sc = sample_config_from(cfg, den.n);
    if (!ablation.empty()) apply_ablation(sc, ablation);

    SampleStats stats;
    const auto vout = sample_volume(vin, den, pm ? &*pm : nullptr, sc, &stats);
    if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
    save_volume(out, vout);

    std::vector<std::string> inputs = {ckpt, input};
    if (pm) inputs.push_back(prior_ckpt);
    write_run_manifest(out + ".run.json", "denoise", argv, cfg, inputs, {out});
    std::printf("denoise: %s -> %s (%lld net evals, %lld ddim + %lld ddpm steps)\n",
                input.c_str(), out.c_str(), static_cast<long long>(stats.net_evals),
                static_cast<long long>(stats.ddim_steps), static_cast<long long>(stats.ddpm_steps));
    return 0;
}

int cmd_ablate(const json& cfg, const std::string& ckpt, const std::string& prior_ckpt,
               const std::string& data, const std::string& split, std::vector<double> fractions,
               const std::string& out_dir, const std::vector<std::string>& argv) {
    const auto den = load_denoiser(ckpt);
    const auto pm = load_prior(prior_ckpt);
    const auto ds = load_dataset(data, split);

    if (fractions.empty()) {
        for (const auto& st : ds.studies)
            for (const auto& low : st.low)
                if (std::find(fractions.begin(), fractions.end(), low.meta.count_fraction) ==
                    fractions.end())
                    fractions.push_back(low.meta.count_fraction);
        std::sort(fractions.begin(), fractions.end());
    }
    const uint64_t root = cfg["seed"].get<uint64_t>();

    fs::create_directories(out_dir);
    const std::string rows_path = out_dir + "/ablation_rows.csv";
    std::ofstream rows_f(rows_path, std::ios::binary);
    if (!rows_f) throw format_error("ablate: cannot open " + rows_path);
    rows_f << "method,study,fraction,psnr,nrmse,ssim,z_consistency,activity_err\n";

    const char* sampled[] = {"proposed", "no_prior", "no_fix_eps", "single_eps", "no_dose"};
    std::vector<StudyScores> rows;
    auto total = [](const Volume3D& v) {
        double s = 0;
        for (float x : v.data) s += x;
        return s;
    };
    auto add = [&](const std::string& method, const Study& st, double f, const Volume3D& v) {
        StudyScores r{method, st.id, f, score_pair(v, st.full)};
        rows.push_back(r);
        const double act = std::fabs(total(v) - total(st.full)) / total(st.full);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%s,%g,%.9g,%.9g,%.9g,%.9g,%.9g\n", method.c_str(),
                      st.id.c_str(), f, r.s.psnr, r.s.nrmse, r.s.ssim, r.s.z_consistency, act);
        rows_f << buf;
        std::printf("ablate: %-10s %s f=%-5g psnr=%.2f\n", method.c_str(), st.id.c_str(), f,
                    r.s.psnr);
    };

    for (size_t si = 0; si < ds.studies.size(); ++si) {
        const auto& st = ds.studies[si];
        for (const auto& low : st.low) {
            const double f = low.meta.count_fraction;
            const long long permille = std::llround(f * 1000.0);
            if (std::none_of(fractions.begin(), fractions.end(), [&](double g) {
                    return std::llround(g * 1000.0) == permille;
                }))
                continue;
            add("input", st, f, low);
            add("prior", st, f, denoise_prior(pm, low));
            for (const char* method : sampled) {
                SampleConfig sc = sample_config_from(cfg, den.n);
                sc.seed = derive_seed(root, "denoise", si, uint64_t(permille));
                const bool drop_prior = std::string(method) == "no_prior";
                if (!drop_prior && std::string(method) != "proposed") apply_ablation(sc, method);
                if (drop_prior) sc.no_prior = true;
                add(method, st, f, sample_volume(low, den, drop_prior ? nullptr : &pm, sc));
            }
        }
    }
    rows_f.close();

    const std::string csv_path = out_dir + "/ablation.csv";
    {
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw format_error("ablate: cannot open " + csv_path);
        f << suite_csv(rows);
    }

    std::vector<std::string> inputs = {ckpt, prior_ckpt, data};
    for (const auto& p : split_files(data, split)) inputs.push_back(p);
    write_run_manifest(out_dir + "/run_manifest.json", "ablate", argv, cfg, inputs,
                       {csv_path, rows_path});
    std::printf("ablate: %zu scored volumes -> %s\n", rows.size(), csv_path.c_str());
    return 0;
}

int cmd_eval(const json& cfg, const std::string& ref_path, const std::vector<std::string>& tests,
             const std::string& png_dir, const std::vector<std::string>& argv) {
    const auto ref = load_volume(ref_path);
    if (!png_dir.empty()) fs::create_directories(png_dir);

    std::printf("file,psnr,nrmse,ssim,z_consistency\n");
    std::vector<std::string> scored, pngs;
    for (const auto& t : tests) {
        if (!fs::exists(t)) {
            std::printf("missing,%s\n", t.c_str());
            continue;
        }
        const auto x = load_volume(t);
        const auto s = score_pair(x, ref);
        std::printf("%s,%.6g,%.6g,%.6g,%.6g\n", t.c_str(), s.psnr, s.nrmse, s.ssim,
                    s.z_consistency);
        scored.push_back(t);
        if (!png_dir.empty()) {
            const std::string p = png_dir + "/" + fs::path(t).stem().string() + ".png";
            render_eval_png(p, x, ref);
            pngs.push_back(p);
        }
    }
    if (!png_dir.empty()) {
        std::vector<std::string> inputs = {ref_path};
        for (const auto& t : scored) inputs.push_back(t);
        write_run_manifest(png_dir + "/run_manifest.json", "eval", argv, cfg, inputs, pngs);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"dose-aware diffusion denoising for low-count PET volumes"};
    app.name("petdiff");
    app.require_subcommand(1);

    ConfigLayer Lgen, Lprior, Ltrain, Lden, Labl, Leval;
    std::string out_dir, data, resume, ckpt, prior_ckpt, input, out_file, ablation, split = "test";
    std::string ref_path, png_dir;
    std::vector<std::string> tests;
    std::vector<double> fractions;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
    gen->add_option("--out", out_dir, "output directory")->required();
    Lgen.bind(gen, "--phantoms", "data.num_phantoms", FlagBinding::INT, "number of phantoms");
    Lgen.bind(gen, "--dim", "data.dim", FlagBinding::INT, "cubic volume edge length");
    auto* fr = gen->add_option("--fractions", fractions, "count fractions, e.g. 0.05,0.5");
    fr->delimiter(',');
    Lgen.bind(gen, "--events-per-unit", "data.events_per_unit", FlagBinding::DBL,
              "expected events per activity unit at full count");
    Lgen.bind(gen, "--train-frac", "data.train_frac", FlagBinding::DBL, "train split share");
    Lgen.bind(gen, "--val-frac", "data.val_frac", FlagBinding::DBL, "val split share");
    Lgen.add_common(gen);

    auto* tp = app.add_subcommand("train-prior", "train the direct regression denoiser");
    tp->add_option("--data", data, "dataset manifest.json")->required();
    tp->add_option("--out", out_dir, "output directory")->required();
    Lprior.bind(tp, "--steps", "prior.steps", FlagBinding::INT, "optimizer steps");
    Lprior.bind(tp, "--batch", "prior.batch", FlagBinding::INT, "batch size");
    Lprior.bind(tp, "--lr", "prior.lr", FlagBinding::DBL, "learning rate");
    Lprior.bind(tp, "--momentum", "prior.momentum", FlagBinding::DBL, "sgd momentum");
    Lprior.bind(tp, "--optimizer", "prior.optimizer", FlagBinding::STR, "sgd | adam");
    Lprior.bind(tp, "--lr-decay", "prior.lr_decay", FlagBinding::STR, "none | cosine");
    Lprior.add_common(tp);

    auto* tr = app.add_subcommand("train", "train the diffusion denoiser");
    tr->add_option("--data", data, "dataset manifest.json")->required();
    tr->add_option("--out", out_dir, "output directory")->required();
    tr->add_option("--resume", resume, "checkpoint to continue from");
    Ltrain.bind(tr, "--steps", "train.steps", FlagBinding::INT, "optimizer steps");
    Ltrain.bind(tr, "--batch", "train.batch", FlagBinding::INT, "batch size");
    Ltrain.bind(tr, "--lr", "train.lr", FlagBinding::DBL, "learning rate");
    Ltrain.bind(tr, "--momentum", "train.momentum", FlagBinding::DBL, "sgd momentum");
    Ltrain.bind(tr, "--optimizer", "train.optimizer", FlagBinding::STR, "sgd | adam");
    Ltrain.bind(tr, "--lr-decay", "train.lr_decay", FlagBinding::STR, "none | cosine");
    Ltrain.add_common(tr);

    auto* dn = app.add_subcommand("denoise", "denoise one low-count volume");
    dn->add_option("--checkpoint", ckpt, "diffusion denoiser checkpoint")->required();
    dn->add_option("--prior-checkpoint", prior_ckpt, "regression denoiser checkpoint");
    dn->add_option("--input", input, "low-count input volume")->required();
    dn->add_option("--out", out_file, "output volume path")->required();
    dn->add_option("--ablate", ablation, "no_prior | no_fix_eps | single_eps | no_dose");
    Lden.bind(dn, "--steps", "sample.num_steps", FlagBinding::INT, "reverse steps");
    Lden.bind(dn, "--t-prime", "sample.t_prime", FlagBinding::INT, "starting diffusion time");
    Lden.bind(dn, "--interleave-period", "sample.interleave_period", FlagBinding::INT,
              "every k-th step is stochastic");
    Lden.add_common(dn);

    auto* ab = app.add_subcommand("ablate", "score every method over a dataset split");
    ab->add_option("--checkpoint", ckpt, "diffusion denoiser checkpoint")->required();
    ab->add_option("--prior-checkpoint", prior_ckpt, "regression denoiser checkpoint")->required();
    ab->add_option("--data", data, "dataset manifest.json")->required();
    ab->add_option("--out", out_dir, "output directory")->required();
    ab->add_option("--split", split, "train | val | test | all");
    auto* afr = ab->add_option("--fractions", fractions, "restrict to these count fractions");
    afr->delimiter(',');
    Labl.bind(ab, "--steps", "sample.num_steps", FlagBinding::INT, "reverse steps");
    Labl.bind(ab, "--t-prime", "sample.t_prime", FlagBinding::INT, "starting diffusion time");
    Labl.bind(ab, "--interleave-period", "sample.interleave_period", FlagBinding::INT,
              "every k-th step is stochastic");
    Labl.add_common(ab);

    auto* ev = app.add_subcommand("eval", "score volumes against a reference");
    ev->add_option("--ref", ref_path, "reference volume")->required();
    ev->add_option("--test", tests, "volume to score (repeatable)")->required();
    ev->add_option("--png", png_dir, "also write report panels into this directory");
    Leval.add_common(ev);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    CLI::App* sub = app.get_subcommands().front();

    json cfg;
    try {
        const ConfigLayer* L = sub == gen   ? &Lgen
                               : sub == tp  ? &Lprior
                               : sub == tr  ? &Ltrain
                               : sub == dn  ? &Lden
                               : sub == ab  ? &Labl
                                            : &Leval;
        cfg = L->resolve();
        if (sub == gen && fr->count()) cfg["data"]["fractions"] = fractions;
        if (sub == dn && prior_ckpt.empty() && ablation != "no_prior")
            throw std::invalid_argument(
                "denoise needs --prior-checkpoint unless --ablate no_prior");
        if (!ablation.empty()) {
            SampleConfig probe;
            apply_ablation(probe, ablation);  // validates the name
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "petdiff: %s\n", e.what());
        return 2;
    }

#ifdef _OPENMP
    if (cfg["threads"].get<int>() > 0) omp_set_num_threads(cfg["threads"].get<int>());
#endif

    try {
        if (sub == gen) return cmd_gen_data(cfg, out_dir, args);
        if (sub == tp) return cmd_train_prior(cfg, data, out_dir, args);
        if (sub == tr) return cmd_train(cfg, data, out_dir, resume, args);
        if (sub == dn) return cmd_denoise(cfg, ckpt, prior_ckpt, input, out_file, ablation, args);
        if (sub == ab) return cmd_ablate(cfg, ckpt, prior_ckpt, data, split, fractions, out_dir, args);
        return cmd_eval(cfg, ref_path, tests, png_dir, args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "petdiff: error: %s\n", e.what());
        return 1;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("petdiff");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(int(argv.size()), argv.data());
}

}  // namespace petdiff
