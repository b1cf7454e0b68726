#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "petdiff/cli.hpp"
#include "petdiff/volume.hpp"

using namespace petdiff;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    std::string path;
    explicit TempDir(std::string p) : path(std::move(p)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

json read_json(const std::string& p) { return json::parse(read_file(p)); }

// run_cli with stdout redirected into a file
std::string capture_run(const std::string& cap_path, const std::vector<std::string>& args,
                        int& rc) {
    std::fflush(stdout);
    const int saved = dup(1);
    REQUIRE(saved >= 0);
    REQUIRE(std::freopen(cap_path.c_str(), "w", stdout) != nullptr);
    rc = run_cli(args);
    std::fflush(stdout);
    dup2(saved, 1);
    close(saved);
    return read_file(cap_path);
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64("", 0) == 14695981039346656037ull);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);

    TempDir tmp("test_tmp_hash");
    {
        std::ofstream f(tmp.path + "/a.txt", std::ios::binary);
        f << "a";
    }
    CHECK(fnv1a64_file(tmp.path + "/a.txt") == 0xaf63dc4c8601ec8cull);
    CHECK_THROWS_AS(fnv1a64_file(tmp.path + "/absent"), format_error);
}

TEST_CASE("malformed invocations exit 2 before touching any files") {
    CHECK(run_cli(std::vector<std::string>{}) == 2);
    CHECK(run_cli({"bogus"}) == 2);
    CHECK(run_cli({"denoise"}) == 2);  // required flags absent
    CHECK(run_cli({"gen-data", "--out", "x", "--unknown", "1"}) == 2);
    CHECK(run_cli({"gen-data", "--out", "x", "--set", "data.bogus=1"}) == 2);
    CHECK(run_cli({"denoise", "--checkpoint", "c", "--input", "i", "--out", "o"}) == 2);
    CHECK(run_cli({"denoise", "--checkpoint", "c", "--input", "i", "--out", "o", "--ablate",
                   "bogus_name", "--prior-checkpoint", "p"}) == 2);
    CHECK(run_cli({"eval", "--test", "x.vol"}) == 2);
    CHECK(!fs::exists("x"));

    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"gen-data", "--help"}) == 0);
}

TEST_CASE("flag beats set entry beats config file beats default") {
    TempDir tmp("test_tmp_prec");
    {
        std::ofstream f(tmp.path + "/cfg.json");
        f << R"({"data": {"dim": 20}, "seed": 5})";
    }
    auto gen = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args = {"gen-data",   "--out", tmp.path + "/" + out,
                                         "--phantoms", "1",     "--fractions",
                                         "0.5",        "--config", tmp.path + "/cfg.json"};
        for (auto& e : extra) args.push_back(std::move(e));
        REQUIRE(run_cli(args) == 0);
        return read_json(tmp.path + "/" + out + "/run_manifest.json");
    };

    auto m1 = gen("d1", {});
    CHECK(m1["config"]["data"]["dim"].get<int>() == 20);  // file beats default 64
    CHECK(m1["config"]["seed"].get<int>() == 5);          // file beats default 1
    CHECK(m1["config"]["data"]["events_per_unit"].get<double>() == 250.0);  // default survives

    auto m2 = gen("d2", {"--set", "data.dim=18"});
    CHECK(m2["config"]["data"]["dim"].get<int>() == 18);  // set beats file

    auto m3 = gen("d3", {"--set", "data.dim=18", "--dim", "16"});
    CHECK(m3["config"]["data"]["dim"].get<int>() == 16);  // flag beats set

    CHECK(m3["config"]["data"]["num_phantoms"].get<int>() == 1);
    CHECK(m3["config"]["data"]["fractions"] == json{0.5});
}

TEST_CASE("a run manifest re-executes its command exactly") {
    TempDir tmp("test_tmp_rerun");
    REQUIRE(run_cli({"gen-data", "--out", tmp.path + "/a", "--phantoms", "2", "--dim", "16",
                     "--fractions", "0.05,0.5", "--events-per-unit", "50", "--seed", "7"}) == 0);
    const auto m = read_json(tmp.path + "/a/run_manifest.json");
    CHECK(m["command"] == "gen-data");
    CHECK(m["argv"].size() >= 10);

    // hashes in the manifest match the files on disk
    for (const auto& [path, h] : m["outputs"].items()) {
        CHECK(h.get<std::string>().size() == 16);
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(path)));
        CHECK(h.get<std::string>() == buf);
    }

    // the config snapshot alone reproduces the dataset byte for byte
    {
        std::ofstream f(tmp.path + "/replay.json");
        f << m["config"].dump();
    }
    REQUIRE(run_cli({"gen-data", "--out", tmp.path + "/b", "--config",
                     tmp.path + "/replay.json"}) == 0);
    for (const char* name : {"manifest.json", "ph000_full.vol", "ph001_f050.vol"})
        CHECK(read_file(tmp.path + "/a/" + name) == read_file(tmp.path + "/b/" + name));
}

TEST_CASE("the full pipeline runs through the command line") {
    TempDir tmp("test_tmp_pipe");
    const std::string data = tmp.path + "/data";
    const std::vector<std::string> tiny = {"--set", "model.n=3",  "--set", "model.w0=4",
                                           "--set", "model.w1=6", "--set", "model.w2=8",
                                           "--set", "model.emb_dim=16"};

    REQUIRE(run_cli({"gen-data", "--out", data, "--phantoms", "2", "--dim", "16", "--fractions",
                     "0.05,0.5", "--events-per-unit", "50", "--seed", "7"}) == 0);

    auto with_tiny = [&](std::vector<std::string> args) {
        for (const auto& t : tiny) args.push_back(t);
        return args;
    };
    REQUIRE(run_cli(with_tiny({"train-prior", "--data", data + "/manifest.json", "--out",
                               tmp.path + "/prior", "--steps", "20", "--batch", "2", "--seed",
                               "7"})) == 0);
    CHECK(fs::exists(tmp.path + "/prior/prior_latest.ckpt"));
    CHECK(fs::exists(tmp.path + "/prior/prior_log.csv"));
    CHECK(fs::exists(tmp.path + "/prior/run_manifest.json"));

    REQUIRE(run_cli(with_tiny({"train", "--data", data + "/manifest.json", "--out",
                               tmp.path + "/train", "--steps", "20", "--batch", "2", "--seed",
                               "7", "--set", "schedule.T=50", "--set",
                               "train.log_every=5"})) == 0);
    CHECK(fs::exists(tmp.path + "/train/denoiser_latest.ckpt"));
    CHECK(read_json(tmp.path + "/train/run_manifest.json")["inputs"].size() == 4);

    auto denoise = [&](const std::string& out, const std::string& seed) {
        return run_cli({"denoise", "--checkpoint", tmp.path + "/train/denoiser_latest.ckpt",
                        "--prior-checkpoint", tmp.path + "/prior/prior_latest.ckpt", "--input",
                        data + "/ph001_f050.vol", "--out", out, "--steps", "4", "--t-prime", "20",
                        "--interleave-period", "2", "--seed", seed});
    };
    REQUIRE(denoise(tmp.path + "/out/d1.vol", "7") == 0);
    REQUIRE(denoise(tmp.path + "/out/d2.vol", "7") == 0);
    CHECK(read_file(tmp.path + "/out/d1.vol") == read_file(tmp.path + "/out/d2.vol"));
    CHECK(fs::exists(tmp.path + "/out/d1.vol.run.json"));

    // a different seed changes the volume; an ablation without the prior runs
    REQUIRE(denoise(tmp.path + "/out/d3.vol", "8") == 0);
    CHECK(read_file(tmp.path + "/out/d1.vol") != read_file(tmp.path + "/out/d3.vol"));
    REQUIRE(run_cli({"denoise", "--checkpoint", tmp.path + "/train/denoiser_latest.ckpt",
                     "--input", data + "/ph001_f050.vol", "--out", tmp.path + "/out/np.vol",
                     "--ablate", "no_prior", "--steps", "4", "--t-prime", "20",
                     "--interleave-period", "2", "--seed", "7"}) == 0);

    int rc = -1;
    const auto text = capture_run(
        tmp.path + "/cap.txt",
        {"eval", "--ref", data + "/ph001_full.vol", "--test", tmp.path + "/out/d1.vol", "--test",
         tmp.path + "/out/absent.vol", "--png", tmp.path + "/panels"},
        rc);
    CHECK(rc == 0);  // missing outputs are listed, not fatal
    CHECK(text.find("missing," + tmp.path + "/out/absent.vol") != std::string::npos);
    CHECK(text.find("file,psnr,nrmse,ssim,z_consistency") != std::string::npos);
    CHECK(fs::exists(tmp.path + "/panels/d1.png"));
    CHECK(fs::exists(tmp.path + "/panels/run_manifest.json"));

    REQUIRE(run_cli({"ablate", "--checkpoint", tmp.path + "/train/denoiser_latest.ckpt",
                     "--prior-checkpoint", tmp.path + "/prior/prior_latest.ckpt", "--data",
                     data + "/manifest.json", "--split", "test", "--fractions", "0.05", "--out",
                     tmp.path + "/abl", "--steps", "4", "--t-prime", "20", "--interleave-period",
                     "2", "--seed", "7"}) == 0);
    const auto csv = read_file(tmp.path + "/abl/ablation.csv");
    CHECK(csv.rfind("method,fraction,psnr,nrmse,ssim,z_consistency\n", 0) == 0);
    for (const char* method :
         {"input,", "prior,", "proposed,", "no_prior,", "no_fix_eps,", "single_eps,", "no_dose,"})
        CHECK(csv.find(method) != std::string::npos);
    CHECK(fs::exists(tmp.path + "/abl/ablation_rows.csv"));

    // pipeline failures exit 1
    CHECK(run_cli({"eval", "--ref", tmp.path + "/nope.vol", "--test",
                   tmp.path + "/out/d1.vol"}) == 1);
    CHECK(run_cli(with_tiny({"train", "--data", tmp.path + "/nope.json", "--out",
                             tmp.path + "/t2", "--steps", "1"})) == 1);
}
