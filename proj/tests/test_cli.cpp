#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lamo/checkpoint.hpp"
#include "lamo/tensor_io.hpp"

using namespace lamo;
namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("LAMO_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LAMO_CLI must point at the built binary");
    return p;
}

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("lamo_cli_out_" + std::to_string(counter++));
    std::string cmd = cli() + " " + args + " > " + log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WEXITSTATUS(raw);
    std::ifstream f(log);
    r.out.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    fs::remove(log);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "lamo_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(bool(f), ("missing file " + p.string()).c_str());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename());
    for (const auto& e : fs::directory_iterator(b)) {
        if (std::find(names.begin(), names.end(), e.path().filename().string()) ==
            names.end()) {
            return false;
        }
    }
    for (const auto& name : names) {
        if (!fs::exists(b / name)) return false;
        if (slurp(a / name) != slurp(b / name)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("version flag exits cleanly") {
    RunResult r = run("--version");
    CHECK(r.code == 0);
    CHECK(r.out.find("lamo") != std::string::npos);
}

TEST_CASE("gen-data is byte-reproducible and missing flags are usage errors") {
    fs::path a = fresh_dir("ds_a"), b = fresh_dir("ds_b");
    CHECK(run("gen-data --out " + a.string() + " --n 16 --seed 7").code == 0);
    CHECK(run("gen-data --out " + b.string() + " --n 16 --seed 7").code == 0);
    CHECK(dirs_byte_identical(a, b));

    // manifest lists every clip
    std::string manifest = slurp(a / "manifest.txt");
    std::size_t count = 0, at = 0;
    while ((at = manifest.find("clip clip_", at)) != std::string::npos) {
        ++count;
        ++at;
    }
    CHECK(count == 16);
    CHECK(slurp(a / "resolved_config.json").find("lamo 0.1.0") != std::string::npos);

    CHECK(run("gen-data --n 4").code == 2);
    CHECK(run("gen-data --out " + fresh_dir("ds_bad").string() + " --n 0").code == 2);
}

TEST_CASE("config file values apply and flags override them") {
    fs::path cfg = fresh_dir("cfg_dir");
    fs::create_directories(cfg);
    std::ofstream f(cfg / "run.json");
    f << R"({"gen-data": {"n": 3, "seed": 9}})";
    f.close();
    fs::path a = fresh_dir("ds_cfg_a");
    CHECK(run("--config " + (cfg / "run.json").string() + " gen-data --out " + a.string())
              .code == 0);
    CHECK(slurp(a / "manifest.txt").find("count 3") != std::string::npos);
    fs::path b = fresh_dir("ds_cfg_b");
    CHECK(run("--config " + (cfg / "run.json").string() + " gen-data --out " + b.string() +
              " --n 5")
              .code == 0);
    CHECK(slurp(b / "manifest.txt").find("count 5") != std::string::npos);
}

TEST_CASE("training commands run, reproduce, and honor --steps 0") {
    fs::path ds = fresh_dir("ds_train");
    REQUIRE(run("gen-data --out " + ds.string() + " --n 6 --seed 3").code == 0);

    fs::path f0 = fresh_dir("field0");
    REQUIRE(run("train-field --data " + ds.string() + " --out " + f0.string() +
                " --steps 0 --width 8 --blocks 1 --seed 4")
                .code == 0);
    FieldNet net = load_fieldnet(f0.string());
    // zero-step checkpoint is still the zero predictor
    for (double v : net.out_w.data) CHECK(v == 0.0);
    CHECK(slurp(f0 / "metrics.txt").empty());

    fs::path f1 = fresh_dir("field1"), f2 = fresh_dir("field2");
    std::string train_args = "train-field --data " + ds.string() +
                             " --steps 3 --batch 2 --width 8 --blocks 1 --seed 4 --out ";
    REQUIRE(run(train_args + f1.string()).code == 0);
    REQUIRE(run(train_args + f2.string()).code == 0);
    CHECK(dirs_byte_identical(f1, f2));
    CHECK(slurp(f1 / "metrics.txt").find("step 3") != std::string::npos);

    fs::path d1 = fresh_dir("deno1");
    REQUIRE(run("train-denoiser --data " + ds.string() + " --out " + d1.string() +
                " --steps 2 --batch 2 --width 8 --spatial-blocks 1 --temporal-mixes 1 --seed 5")
                .code == 0);
    std::string metrics = slurp(d1 / "metrics.txt");
    CHECK(metrics.find("denoise") != std::string::npos);
    CHECK(metrics.find("drift") != std::string::npos);

    CHECK(run("train-field --data /nonexistent_dir --out " + fresh_dir("fx").string()).code ==
          1);
}

TEST_CASE("sampling equivalences and reproducibility") {
    fs::path ds = fresh_dir("ds_sample");
    REQUIRE(run("gen-data --out " + ds.string() + " --n 4 --seed 11").code == 0);
    fs::path deno = fresh_dir("deno_s");
    REQUIRE(run("train-denoiser --data " + ds.string() + " --out " + deno.string() +
                " --steps 2 --batch 2 --width 8 --spatial-blocks 1 --temporal-mixes 1 --seed 6")
                .code == 0);
    fs::path field = fresh_dir("field_s");
    REQUIRE(run("train-field --data " + ds.string() + " --out " + field.string() +
                " --steps 2 --batch 2 --width 8 --blocks 1 --seed 7")
                .code == 0);

    std::string base = "sample --denoiser " + deno.string() + " --fieldnet " + field.string() +
                       " --steps 6 --seed 21 --out ";
    fs::path off = fresh_dir("smp_off"), lam0 = fresh_dir("smp_lam0"), rho0 =
        fresh_dir("smp_rho0");
    REQUIRE(run(base + off.string() + " --guidance off --lambda-guide 25").code == 0);
    REQUIRE(run(base + lam0.string() + " --guidance noise --lambda-guide 0").code == 0);
    REQUIRE(run(base + rho0.string() + " --guidance noise --rho 0").code == 0);
    CHECK(slurp(off / "sample.lmt") == slurp(lam0 / "sample.lmt"));
    CHECK(slurp(off / "sample.lmt") == slurp(rho0 / "sample.lmt"));

    fs::path again = fresh_dir("smp_again");
    REQUIRE(run(base + again.string() + " --guidance off --lambda-guide 25").code == 0);
    CHECK(slurp(off / "sample.lmt") == slurp(again / "sample.lmt"));
    CHECK(slurp(off / "metrics.txt").find("guide_loss") != std::string::npos);

    fs::path paired = fresh_dir("smp_paired");
    REQUIRE(run(base + paired.string() + " --paired-seeds 2").code == 0);
    std::string table = slurp(paired / "paired_lguide.txt");
    CHECK(table.find("seed guided_final_Lguide unguided_final_Lguide") != std::string::npos);
    CHECK(table.find("mean ") != std::string::npos);

    fs::path traj = fresh_dir("smp_traj");
    REQUIRE(run(base + traj.string() + " --dump-trajectory").code == 0);
    CHECK(fs::exists(traj / "trajectory" / "step_000_zt.lmt"));
    CHECK(fs::exists(traj / "trajectory" / "step_005_eps_guided.lmt"));
}

TEST_CASE("heatmap command emits P5 images and metadata") {
    fs::path ds = fresh_dir("ds_hm");
    REQUIRE(run("gen-data --out " + ds.string() + " --n 2 --seed 13 --speed-min 0 --speed-max 0")
                .code == 0);
    fs::path field = fresh_dir("field_hm");
    REQUIRE(run("train-field --data " + ds.string() + " --out " + field.string() +
                " --steps 0 --width 8 --blocks 1 --seed 3")
                .code == 0);
    fs::path out = fresh_dir("hm_out");
    REQUIRE(run("heatmap --clip " + (ds / "clip_0000.lmt").string() + " --meta " +
                (ds / "clip_0000.meta").string() + " --fieldnet " + field.string() + " --out " +
                out.string())
                .code == 0);
    // static clip: both maps all-zero pixels
    for (const char* name : {"drift.pgm", "field.pgm"}) {
        std::string img = slurp(out / name);
        CHECK(img.substr(0, 2) == "P5");
        std::size_t data_at = img.find("255\n") + 4;
        for (std::size_t i = data_at; i < img.size(); ++i) CHECK(img[i] == 0);
    }
    std::string meta = slurp(out / "heatmap_meta.txt");
    CHECK(meta.find("t_star 0") != std::string::npos);
    CHECK(meta.find("kind drift") != std::string::npos);
    CHECK(meta.find("kind field") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage errors from runtime failures") {
    // usage/config errors -> 2
    CHECK(run("sample --out /tmp/lamo_nowhere").code == 2);          // missing --denoiser
    CHECK(run("heatmap --out /tmp/lamo_nowhere").code == 2);         // missing --clip
    CHECK(run("train-denoiser --data x").code == 2);                 // missing --out
    CHECK(run("nonsense-subcommand").code == 2);
    // runtime failures -> 1
    CHECK(run("sample --denoiser /nonexistent_ckpt --guidance off --out " +
              fresh_dir("smp_err").string())
              .code == 1);
    CHECK(run("heatmap --clip /nonexistent.lmt --out " + fresh_dir("hm_err").string()).code ==
          1);
}

TEST_CASE("check command reports per-property results and catches corruption") {
    RunResult ok = run("check --probes 1");
    CHECK(ok.code == 0);
    CHECK(ok.out.find("PASS lmt1-round-trip") != std::string::npos);
    CHECK(ok.out.find("PASS drift-decomposition") != std::string::npos);
    CHECK(ok.out.find("FAIL") == std::string::npos);

    fs::path ds = fresh_dir("ds_check");
    REQUIRE(run("gen-data --out " + ds.string() + " --n 3 --seed 17").code == 0);
    CHECK(run("check --probes 1 --data " + ds.string()).code == 0);
    // corrupt one clip: the data check must fail and name the file
    std::string bytes = slurp(ds / "clip_0001.lmt");
    bytes.resize(bytes.size() - 1);
    std::ofstream f(ds / "clip_0001.lmt", std::ios::binary | std::ios::trunc);
    f << bytes;
    f.close();
    RunResult bad = run("check --probes 1 --data " + ds.string());
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL dataset-integrity") != std::string::npos);
    CHECK(bad.out.find("clip_0001") != std::string::npos);
}
