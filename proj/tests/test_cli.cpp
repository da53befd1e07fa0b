#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "soundclr/checkpoint.hpp"
#include "soundclr/dsp.hpp"

using namespace soundclr;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SOUNDCLR_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

int run_env(const std::string& env, const std::string& args) {
    const std::string cmd = env + " " + kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

fs::path work_dir() {
    const fs::path d = fs::temp_directory_path() / "soundclr_test_cli";
    fs::create_directories(d);
    return d;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream f(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++n;
    return n;
}

} // namespace

TEST_CASE("no subcommand is a usage error") { REQUIRE(run("") != 0); }

TEST_CASE("SOUNDCLR_THREADS must be a non-negative integer") {
    const fs::path out = work_dir() / "threads_probe";
    REQUIRE(run_env("SOUNDCLR_THREADS=abc", "synth --out " + out.string()) == 1);
    REQUIRE(run_env("SOUNDCLR_THREADS=-2", "synth --out " + out.string()) == 1);
    REQUIRE(run_env("SOUNDCLR_THREADS=1", "synth --out " + out.string()) == 0);
}

TEST_CASE("synth writes the corpus and featurize caches it") {
    const fs::path corpus = work_dir() / "corpus";
    fs::remove_all(corpus);
    REQUIRE(run("synth --out " + corpus.string()) == 0);
    REQUIRE(fs::exists(corpus / "manifest.csv"));
    std::size_t wavs = 0;
    for (const auto& e : fs::directory_iterator(corpus))
        if (e.path().extension() == ".wav") ++wavs;
    REQUIRE(wavs == 160);

    const fs::path feats = work_dir() / "feats";
    fs::remove_all(feats);
    REQUIRE(run("featurize --manifest " + (corpus / "manifest.csv").string() + " --out " + feats.string() +
                " --rate 22050 --seconds 2") == 0);
    std::size_t n_feat = 0;
    fs::path one;
    for (const auto& e : fs::directory_iterator(feats))
        if (e.path().extension() == ".feat") {
            ++n_feat;
            one = e.path();
        }
    REQUIRE(n_feat == 160);

    const LogMelSpectrogram spec = load_feature(one.string());
    REQUIRE(spec.n_mels == 128);
    REQUIRE(spec.n_frames == 85); // 1 + (44100 - 1024) / 512

    // featurizing again reproduces identical bytes
    const std::string before = read_file(one);
    const fs::path feats2 = work_dir() / "feats2";
    fs::remove_all(feats2);
    REQUIRE(run("featurize --manifest " + (corpus / "manifest.csv").string() + " --out " + feats2.string() +
                " --rate 22050 --seconds 2") == 0);
    REQUIRE(read_file(feats2 / one.filename()) == before);
}

TEST_CASE("featurize with a missing manifest is a data error") {
    REQUIRE(run("featurize --manifest /nonexistent/meta.csv --out " + (work_dir() / "x").string()) == 2);
}

TEST_CASE("train then eval on the synthetic corpus") {
    const fs::path out = work_dir() / "run";
    fs::remove_all(out);
    REQUIRE(run("train --dataset synthetic --epochs 2 --batch-size 16 --seed 4 --val-fold 1 --out " +
                out.string()) == 0);

    REQUIRE(fs::exists(out / "metrics.csv"));
    REQUIRE(count_lines(out / "metrics.csv") == 3); // header + 2 epochs
    REQUIRE(fs::exists(out / "best.sckp"));
    REQUIRE(fs::exists(out / "config.resolved.json"));

    const nlohmann::json resolved = nlohmann::json::parse(read_file(out / "config.resolved.json"));
    REQUIRE(resolved["train"]["epochs"] == 2);
    REQUIRE(resolved["train"]["batch_size"] == 16);
    REQUIRE(resolved["train"]["seed"] == 4);
    REQUIRE(resolved["train"]["model"]["num_classes"] == 4);
    REQUIRE(resolved["dataset"]["source"] == "synthetic");

    const Checkpoint ck = load_checkpoint((out / "best.sckp").string());
    REQUIRE(ck.config.model.num_classes == 4);
    REQUIRE(ck.seed == 4);

    const fs::path eval_out = work_dir() / "eval";
    fs::remove_all(eval_out);
    REQUIRE(run("eval --checkpoint " + (out / "best.sckp").string() +
                " --dataset synthetic --fold 1 --noise-sweep --sigmas 0,0.0001 --margins --out " +
                eval_out.string()) == 0);
    REQUIRE(fs::exists(eval_out / "metrics.csv"));
    REQUIRE(count_lines(eval_out / "metrics.csv") == 2);
    REQUIRE(fs::exists(eval_out / "noise_sweep.csv"));
    REQUIRE(count_lines(eval_out / "noise_sweep.csv") == 3); // header + 2 sigmas
    REQUIRE(fs::exists(eval_out / "margins.csv"));
    REQUIRE(count_lines(eval_out / "margins.csv") == 2);
}

TEST_CASE("train honors a JSON config file with flag overrides on top") {
    const fs::path out = work_dir() / "run_cfg";
    fs::remove_all(out);
    const fs::path cfg = work_dir() / "run.json";
    {
        std::ofstream f(cfg);
        f << R"({"train": {"scheme": "ce", "epochs": 3, "batch_size": 16, "seed": 9},
                 "dataset": {"source": "synthetic"},
                 "val_fold": 2})";
    }
    REQUIRE(run("train --config " + cfg.string() + " --epochs 1 --out " + out.string()) == 0);
    const nlohmann::json resolved = nlohmann::json::parse(read_file(out / "config.resolved.json"));
    REQUIRE(resolved["train"]["scheme"] == "ce");
    REQUIRE(resolved["train"]["epochs"] == 1); // flag beats file
    REQUIRE(resolved["val_fold"] == 2);
    REQUIRE(count_lines(out / "metrics.csv") == 2);
}

TEST_CASE("train error paths use the documented exit codes") {
    const fs::path out = work_dir() / "run_bad";
    REQUIRE(run("train --dataset synthetic --epochs 1 --out " + out.string() + " --scheme nonsense") == 1);
    REQUIRE(run("train --dataset synthetic --epochs 1") == 1); // no --out
    REQUIRE(run("train --dataset /nonexistent/meta.csv --epochs 1 --out " + out.string()) == 2);
    REQUIRE(run("train --dataset synthetic --epochs 1 --val-fold 9 --out " + out.string()) == 1);
    REQUIRE(run("train --config /nonexistent/cfg.json --dataset synthetic --out " + out.string()) == 1);
}

TEST_CASE("eval error paths use the documented exit codes") {
    REQUIRE(run("eval --dataset synthetic") == 1); // neither --checkpoint nor --ensemble
    REQUIRE(run("eval --checkpoint /nonexistent/best.sckp --dataset synthetic") == 2);
}

TEST_CASE("gradcheck passes and exits cleanly") { REQUIRE(run("gradcheck") == 0); }
