#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vforge/cli.hpp"
#include "vforge/flow.hpp"
#include "vforge/nifti.hpp"
#include "vforge/rng.hpp"

using namespace vforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_root() {
    fs::path dir = fs::temp_directory_path() / "vforge_cli_test";
    fs::create_directories(dir);
    return dir;
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

// Runs cli::dispatch in-process with stdout/stderr captured to files.
CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"vesselforge"};
    for (const auto& a : args) argv.push_back(a.c_str());

    fs::path dir = temp_root();
    std::string out_path = (dir / "stdout.txt").string();
    std::string err_path = (dir / "stderr.txt").string();

    std::fflush(stdout);
    std::fflush(stderr);
    int saved_out = dup(1), saved_err = dup(2);
    FILE* fo = std::freopen(out_path.c_str(), "w", stdout);
    FILE* fe = std::freopen(err_path.c_str(), "w", stderr);
    REQUIRE(fo != nullptr);
    REQUIRE(fe != nullptr);

    int code = cli::dispatch(int(argv.size()), argv.data());

    std::fflush(stdout);
    std::fflush(stderr);
    dup2(saved_out, 1);
    dup2(saved_err, 2);
    close(saved_out);
    close(saved_err);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    return {code, slurp(out_path), slurp(err_path)};
}

std::map<std::string, std::vector<char>> tree_bytes(const fs::path& root) {
    std::map<std::string, std::vector<char>> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in),
                                                      std::istreambuf_iterator<char>()};
    }
    return out;
}

}  // namespace

TEST_CASE("unknown subcommands and flags exit 2 with usage text") {
    CliResult r = run_cli({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);

    CliResult r2 = run_cli({"metrics", "dice", "--pred", "a", "--gt", "b", "--bogus"});
    CHECK(r2.code == 2);
}

TEST_CASE("runtime failures exit 1 with a machine-readable error line") {
    CliResult r = run_cli({"metrics", "dice", "--pred", "/no/such.nii", "--gt", "/no/such.nii"});
    CHECK(r.code == 1);
    CHECK(r.err.find("error code=") != std::string::npos);
}

TEST_CASE("metrics dice on identical masks prints 1.0") {
    fs::path dir = temp_root();
    BinaryMask m({8, 8, 8});
    for (int x = 2; x < 6; ++x) m.at(4, 4, x) = 1;
    std::string path = (dir / "same.nii.gz").string();
    io::write_mask(path, m);
    CliResult r = run_cli({"metrics", "dice", "--pred", path, "--gt", path});
    CHECK(r.code == 0);
    CHECK(r.out.find("dice 1.000000") != std::string::npos);
}

TEST_CASE("metrics cldice prints the full report") {
    fs::path dir = temp_root();
    BinaryMask m({6, 6, 12});
    for (int x = 1; x < 11; ++x) m.at(3, 3, x) = 1;
    std::string path = (dir / "tube.nii.gz").string();
    io::write_mask(path, m);
    CliResult r = run_cli({"metrics", "cldice", "--pred", path, "--gt", path});
    CHECK(r.code == 0);
    CHECK(r.out.find("cldice 1.000000") != std::string::npos);
    CHECK(r.out.find("tprec") != std::string::npos);
}

TEST_CASE("gen drand reruns are bitwise identical; workers do not matter") {
    fs::path base = temp_root();
    fs::path d1 = base / "gen1", d2 = base / "gen2", d3 = base / "gen3";
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(d3);
    std::vector<std::string> common = {"gen",    "drand",        "--count", "2",
                                       "--seed", "7",            "--size",  "20"};
    auto with_out = [&](const fs::path& p, std::vector<std::string> extra) {
        std::vector<std::string> args = common;
        args.push_back("--out");
        args.push_back(p.string());
        for (auto& e : extra) args.push_back(e);
        return args;
    };
    CHECK(run_cli(with_out(d1, {})).code == 0);
    CHECK(run_cli(with_out(d2, {})).code == 0);
    CHECK(run_cli(with_out(d3, {"--workers", "4"})).code == 0);
    auto t1 = tree_bytes(d1), t2 = tree_bytes(d2), t3 = tree_bytes(d3);
    CHECK(t1.size() > 0);
    CHECK(t1 == t2);
    CHECK(t1 == t3);
}

TEST_CASE("different seeds land in different hash directories") {
    fs::path base = temp_root() / "hashdirs";
    fs::remove_all(base);
    CHECK(run_cli({"gen", "masks", "--count", "1", "--seed", "1", "--size", "20", "--out",
                   base.string()})
              .code == 0);
    CHECK(run_cli({"gen", "masks", "--count", "1", "--seed", "2", "--size", "20", "--out",
                   base.string()})
              .code == 0);
    int subdirs = 0;
    for (const auto& e : fs::directory_iterator(base))
        if (e.is_directory()) ++subdirs;
    CHECK(subdirs == 2);
}

TEST_CASE("VESSELFORGE_SEED env is honored and the flag wins") {
    fs::path base = temp_root() / "envseed";
    fs::remove_all(base);
    fs::path via_env = base / "env", via_flag = base / "flag", flag_wins = base / "both";

    setenv("VESSELFORGE_SEED", "5", 1);
    CHECK(run_cli({"gen", "masks", "--count", "1", "--size", "20", "--out", via_env.string()})
              .code == 0);
    unsetenv("VESSELFORGE_SEED");
    CHECK(run_cli({"gen", "masks", "--count", "1", "--seed", "5", "--size", "20", "--out",
                   via_flag.string()})
              .code == 0);
    setenv("VESSELFORGE_SEED", "99", 1);
    CHECK(run_cli({"gen", "masks", "--count", "1", "--seed", "5", "--size", "20", "--out",
                   flag_wins.string()})
              .code == 0);
    unsetenv("VESSELFORGE_SEED");

    CHECK(tree_bytes(via_env) == tree_bytes(via_flag));
    CHECK(tree_bytes(via_flag) == tree_bytes(flag_wins));
}

TEST_CASE("fm sample with the analytic oracle fixture reproduces the target via one step") {
    fs::path dir = temp_root() / "fmsample";
    fs::create_directories(dir);

    Rng rng(3, 0);
    Volume target({12, 12, 12});
    for (auto& v : target.data) v = float(rng.uniform());
    flow::OracleField oracle(target);
    std::string field_path = (dir / "oracle.vff").string();
    flow::save_field(oracle, field_path);

    BinaryMask mask({12, 12, 12});
    mask.at(6, 6, 6) = 1;
    std::string mask_path = (dir / "mask.nii.gz").string();
    io::write_mask(mask_path, mask);

    std::string out_path = (dir / "sample.nii.gz").string();
    CliResult r = run_cli({"fm", "sample", "--field", field_path, "--mask", mask_path, "--class",
                           "1", "--steps", "1", "--seed", "4", "--out", out_path});
    REQUIRE(r.code == 0);
    Volume out = io::read_image(out_path);
    REQUIRE(out.shape == target.shape);
    for (int64_t i = 0; i < out.shape.voxels(); ++i)
        CHECK(std::abs(out.data[size_t(i)] - target.data[size_t(i)]) < 1e-5f);
}

TEST_CASE("preprocess clip runs end to end") {
    fs::path dir = temp_root() / "clip";
    fs::create_directories(dir);
    Rng rng(8, 0);
    Volume v({10, 10, 10});
    for (auto& x : v.data) x = float(rng.uniform(0.0, 10.0));
    std::string in = (dir / "in.nii.gz").string();
    std::string out = (dir / "out.nii.gz").string();
    io::write_volume(in, v);
    CliResult r = run_cli({"preprocess", "clip", "--in", in, "--out", out, "--low", "0", "--high",
                           "98"});
    REQUIRE(r.code == 0);
    Volume res = io::read_image(out);
    for (float x : res.data) {
        CHECK(x >= 0.f);
        CHECK(x <= 1.f);
    }
}

TEST_CASE("mix materializes a weighted stream with provenance sidecars") {
    fs::path dir = temp_root() / "mix";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // A tiny real source directory, class 7.
    fs::path real_dir = dir / "real7";
    fs::create_directories(real_dir);
    for (int i = 0; i < 2; ++i) {
        char img_name[32], lbl_name[32];
        std::snprintf(img_name, sizeof(img_name), "%06d_img.nii.gz", i);
        std::snprintf(lbl_name, sizeof(lbl_name), "%06d_lbl.nii.gz", i);
        Volume v({16, 16, 16}, 0.25f + 0.1f * float(i));
        BinaryMask m({16, 16, 16});
        m.at(8, 8, 8) = 1;
        io::write_volume((real_dir / img_name).string(), v);
        io::write_mask((real_dir / lbl_name).string(), m);
    }

    nlohmann::json manifest;
    manifest["sources"] = nlohmann::json::array();
    manifest["sources"].push_back({{"kind", "drand"}, {"count", 4}});
    manifest["sources"].push_back(
        {{"kind", "real"}, {"class", 7}, {"count", 2}, {"dir", real_dir.string()}});
    manifest["exclude_classes"] = {1, 2, 3, 4};
    nlohmann::json dcfg;
    dcfg["target"] = {16, 16, 16};
    dcfg["tree"] = {{"bounds", {24, 24, 24}}};
    dcfg["spatial"] = {{"crop_target", {16, 16, 16}}, {"elastic_spacing", 8}};
    manifest["drand"] = dcfg;
    std::string manifest_path = (dir / "manifest.json").string();
    std::ofstream(manifest_path) << manifest.dump(2);

    CliResult r = run_cli({"mix", "--manifest", manifest_path, "--weights", "0.5,0.5,0.0",
                           "--count", "6", "--seed", "11", "--out", (dir / "out").string()});
    REQUIRE(r.code == 0);

    int imgs = 0, sidecars = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "out")) {
        std::string name = e.path().filename().string();
        if (name.ends_with("_img.nii.gz")) ++imgs;
        if (name.ends_with("_img.nii.gz.json")) ++sidecars;
    }
    CHECK(imgs == 6);
    CHECK(sidecars == 6);
}
