// soundclr: train / eval / featurize / gradcheck / synth command-line front end.
//
// Exit codes: 0 ok, 1 config error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "soundclr/soundclr.hpp"

namespace fs = std::filesystem;
using namespace soundclr;

namespace {

struct DatasetOpts {
    std::string source; // "synthetic" or a manifest path
    int canonical_rate = 44100;
    double clip_seconds = 5.0;
    std::uint64_t synth_seed = 7;
};

struct RunConfig {
    TrainConfig train;
    DatasetOpts dataset;
    bool cv = false;
    int val_fold = 1;
    std::string out_dir;
};

void from_json_run(const json& j, RunConfig& rc) {
    if (j.contains("train")) j.at("train").get_to(rc.train);
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        rc.dataset.source = d.value("source", rc.dataset.source);
        rc.dataset.canonical_rate = d.value("canonical_rate", rc.dataset.canonical_rate);
        rc.dataset.clip_seconds = d.value("clip_seconds", rc.dataset.clip_seconds);
        rc.dataset.synth_seed = d.value("synth_seed", rc.dataset.synth_seed);
    }
    rc.cv = j.value("cv", rc.cv);
    rc.val_fold = j.value("val_fold", rc.val_fold);
    rc.out_dir = j.value("out", rc.out_dir);
}

json to_json_run(const RunConfig& rc) {
    json j;
    j["train"] = rc.train;
    j["dataset"] = {{"source", rc.dataset.source},
                    {"canonical_rate", rc.dataset.canonical_rate},
                    {"clip_seconds", rc.dataset.clip_seconds},
                    {"synth_seed", rc.dataset.synth_seed}};
    j["cv"] = rc.cv;
    j["val_fold"] = rc.val_fold;
    j["out"] = rc.out_dir;
    return j;
}

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
    }
}

Dataset build_dataset(RunConfig& rc) {
    if (rc.dataset.source.empty()) throw ConfigError("no dataset source given (use --dataset)");
    if (rc.dataset.source == "synthetic") {
        SynthSpec spec;
        spec.seed = rc.dataset.synth_seed;
        rc.dataset.canonical_rate = spec.sample_rate;
        rc.dataset.clip_seconds = spec.clip_seconds;
        return generate(spec);
    }
    if (!fs::exists(rc.dataset.source)) throw DataError("manifest not found: " + rc.dataset.source);
    return load_dataset(rc.dataset.source, rc.dataset.canonical_rate);
}

// Fill in the fields that follow from the dataset.
void resolve(RunConfig& rc, const Dataset& ds) {
    rc.train.model.num_classes = ds.num_classes;
    rc.train.augment.target_len =
        static_cast<long>(std::llround(rc.dataset.clip_seconds * rc.dataset.canonical_rate));
    rc.train.validate();
}

void write_fold_summary(const std::string& path, const CrossValidation& cv) {
    std::ofstream f(path);
    f << "fold,accuracy\n";
    f.precision(12);
    for (const FoldResult& fr : cv.folds) f << fr.fold << ',' << fr.metrics.accuracy << '\n';
    f << "mean," << cv.mean_accuracy << "\nstd," << cv.std_accuracy << '\n';
}

int cmd_train(RunConfig rc) {
    if (rc.out_dir.empty()) throw ConfigError("train: --out is required");
    Dataset ds = build_dataset(rc);
    resolve(rc, ds);
    fs::create_directories(rc.out_dir);
    {
        std::ofstream f(fs::path(rc.out_dir) / "config.resolved.json");
        f << to_json_run(rc).dump(2) << '\n';
    }

    if (rc.cv) {
        const CrossValidation cv = cross_validate(ds, rc.train);
        for (const FoldResult& fr : cv.folds) {
            write_metrics_csv((fs::path(rc.out_dir) / ("metrics_fold" + std::to_string(fr.fold) + ".csv")).string(),
                              fr.run.history);
            save_checkpoint(fr.run.best,
                            (fs::path(rc.out_dir) / ("best_fold" + std::to_string(fr.fold) + ".sckp")).string());
        }
        write_fold_summary((fs::path(rc.out_dir) / "cv_summary.csv").string(), cv);
        std::printf("cross-validated accuracy: %.4f +- %.4f over %zu folds\n", cv.mean_accuracy, cv.std_accuracy,
                    cv.folds.size());
        return 0;
    }

    if (rc.val_fold < 1 || rc.val_fold > ds.num_folds) throw ConfigError("train: val_fold out of range");
    const TrainResult r =
        train(ds, rc.train, ds.except_fold_indices(rc.val_fold), ds.fold_indices(rc.val_fold));
    write_metrics_csv((fs::path(rc.out_dir) / "metrics.csv").string(), r.history);
    save_checkpoint(r.best, (fs::path(rc.out_dir) / "best.sckp").string());
    std::printf("best epoch %d: val_acc %.4f\n", r.best_epoch,
                r.history[static_cast<std::size_t>(r.best_epoch)].val_acc);
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_src, int fold, bool do_noise,
             std::vector<double> sigmas, const std::string& ensemble_dir, bool do_margins,
             const std::string& out_dir) {
    RunConfig rc;
    rc.dataset.source = dataset_src;

    std::vector<Checkpoint> ckpts;
    if (!ensemble_dir.empty()) {
        std::vector<std::string> paths;
        for (const auto& e : fs::directory_iterator(ensemble_dir))
            if (e.path().extension() == ".sckp") paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw DataError("eval: no .sckp files in " + ensemble_dir);
        for (const std::string& p : paths) ckpts.push_back(load_checkpoint(p));
    } else {
        ckpts.push_back(load_checkpoint(ckpt_path));
    }

    rc.train = ckpts[0].config;
    Dataset ds = build_dataset(rc);
    if (ds.num_classes != ckpts[0].config.model.num_classes)
        throw DataError("eval: class-count mismatch between checkpoint and dataset");
    resolve(rc, ds);
    if (fold < 1 || fold > ds.num_folds) throw ConfigError("eval: fold out of range");
    if (!out_dir.empty()) fs::create_directories(out_dir);

    std::vector<Model> models;
    for (const Checkpoint& c : ckpts) {
        Model m(c.config.model);
        m.params = c.params;
        models.push_back(std::move(m));
    }
    std::vector<const Model*> mptrs;
    for (const Model& m : models) mptrs.push_back(&m);

    const MelBank bank(rc.train.stft, ds.samples[0].sample_rate);
    const std::vector<int> vidx = ds.fold_indices(fold);
    const std::vector<Tensor> feats = eval_features(ds, vidx, rc.train.augment.target_len, rc.train.stft, bank);
    const std::vector<int> labels = slice_labels(ds, vidx);

    const Metrics m = models.size() == 1 ? evaluate(models[0], feats, labels)
                                         : evaluate_ensemble(mptrs, feats, labels);
    std::printf("fold %d: accuracy %.4f  mean_loss %.4f  (%zu samples, %zu model%s)\n", fold, m.accuracy,
                m.mean_loss, m.total, models.size(), models.size() == 1 ? "" : "s");
    if (!out_dir.empty()) {
        std::ofstream f(fs::path(out_dir) / "metrics.csv");
        f.precision(12);
        f << "accuracy,mean_loss,samples\n" << m.accuracy << ',' << m.mean_loss << ',' << m.total << '\n';
    }

    if (do_noise) {
        if (sigmas.empty()) sigmas = {1e-4, 5e-4, 1e-3};
        const std::vector<double> acc = noise_sweep(models[0], ds, vidx, sigmas, rc.train.seed,
                                                    rc.train.augment.target_len, rc.train.stft, bank);
        std::ofstream f(fs::path(out_dir.empty() ? "." : out_dir) / "noise_sweep.csv");
        f.precision(12);
        f << "sigma,accuracy\n";
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            f << sigmas[i] << ',' << acc[i] << '\n';
            std::printf("sigma %.1e: accuracy %.4f\n", sigmas[i], acc[i]);
        }
    }

    if (do_margins) {
        const MarginStats s = margin_stats(models[0], feats, labels);
        std::ofstream f(fs::path(out_dir.empty() ? "." : out_dir) / "margins.csv");
        f.precision(12);
        f << "intra,inter,margin\n" << s.intra << ',' << s.inter << ',' << s.margin << '\n';
        std::printf("margin: intra %.4f  inter %.4f  margin %.4f\n", s.intra, s.inter, s.margin);
    }
    return 0;
}

int cmd_featurize(const std::string& manifest, const std::string& out_dir, int rate, double seconds) {
    const Dataset ds = load_dataset(manifest, rate);
    fs::create_directories(out_dir);
    StftConfig stft;
    const MelBank bank(stft, rate);
    const long target_len = static_cast<long>(std::llround(seconds * rate));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const WaveSample& w = ds.samples[i];
        const WaveSample fitted = fit_length_center(w, target_len);
        const LogMelSpectrogram spec = log_mel(fitted, stft, bank);
        const std::string stem = fs::path(w.source_id).stem().string();
        save_feature((fs::path(out_dir) / (stem + ".feat")).string(), spec);
    }
    std::printf("wrote %zu feature files to %s\n", ds.samples.size(), out_dir.c_str());
    return 0;
}

int cmd_gradcheck() {
    const auto reports = gradcheck::run_suite(12345);
    bool all_pass = true;
    for (const auto& r : reports) {
        std::printf("%-24s max_rel_err %.3e  %s\n", r.op.c_str(), r.max_rel_err, r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) throw NumericError("gradcheck: at least one op failed");
    return 0;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    const Dataset ds = generate(spec);
    dump_dataset(ds, spec, out_dir);
    std::printf("wrote %zu clips + manifest.csv to %s\n", ds.samples.size(), out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SoundCLR environmental-sound-classification toolkit"};
    app.require_subcommand(1);

    // Honored as a cap on worker threads; the current implementation runs a
    // single thread, so any value >= 0 is valid.
    if (const char* tv = std::getenv("SOUNDCLR_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(tv, &end, 10);
        if (end == tv || *end != '\0' || v < 0) {
            std::fprintf(stderr, "error: SOUNDCLR_THREADS must be a non-negative integer\n");
            return 1;
        }
    }

    // train
    auto* t = app.add_subcommand("train", "train a model (single split or cross-validation)");
    std::string t_config, t_scheme, t_dataset, t_out;
    double t_alpha = -1.0, t_lr = -1.0, t_tau = -1.0;
    int t_epochs = -1, t_batch = -1, t_val_fold = -1;
    std::int64_t t_seed = -1;
    bool t_cv = false;
    t->add_option("--config", t_config, "JSON run config");
    t->add_option("--scheme", t_scheme, "ce | two_stage_contrastive | hybrid");
    t->add_option("--alpha", t_alpha, "hybrid loss mixing weight");
    t->add_option("--tau", t_tau, "contrastive temperature");
    t->add_option("--lr", t_lr, "base learning rate");
    t->add_option("--epochs", t_epochs, "training epochs");
    t->add_option("--batch-size", t_batch, "batch size");
    t->add_option("--seed", t_seed, "run seed");
    t->add_option("--dataset", t_dataset, "'synthetic' or a manifest CSV path");
    t->add_option("--val-fold", t_val_fold, "validation fold (single-split mode)");
    t->add_flag("--cv", t_cv, "run official-fold cross-validation");
    t->add_option("--out", t_out, "output directory");

    // eval
    auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string e_ckpt, e_dataset, e_ensemble, e_out;
    int e_fold = 1;
    bool e_noise = false, e_margins = false;
    std::vector<double> e_sigmas;
    e->add_option("--checkpoint", e_ckpt, "checkpoint file (.sckp)");
    e->add_option("--dataset", e_dataset, "'synthetic' or a manifest CSV path")->required();
    e->add_option("--fold", e_fold, "fold to evaluate");
    e->add_flag("--noise-sweep", e_noise, "white-noise robustness sweep");
    e->add_option("--sigmas", e_sigmas, "noise standard deviations")->delimiter(',');
    e->add_option("--ensemble", e_ensemble, "directory of checkpoints to softmax-average");
    e->add_flag("--margins", e_margins, "representation margin diagnostic");
    e->add_option("--out", e_out, "output directory for CSVs");

    // featurize
    auto* fz = app.add_subcommand("featurize", "write log-mel feature cache files for a manifest");
    std::string f_manifest, f_out;
    int f_rate = 44100;
    double f_seconds = 5.0;
    fz->add_option("--manifest", f_manifest, "manifest CSV")->required();
    fz->add_option("--out", f_out, "output directory")->required();
    fz->add_option("--rate", f_rate, "canonical sample rate");
    fz->add_option("--seconds", f_seconds, "clip length in seconds");

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference gradient suite for all ops and losses");

    // synth
    auto* sy = app.add_subcommand("synth", "generate the synthetic corpus as WAVs + manifest");
    std::string s_out;
    std::uint64_t s_seed = 7;
    sy->add_option("--out", s_out, "output directory")->required();
    sy->add_option("--seed", s_seed, "corpus seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed()) {
            RunConfig rc;
            json cfg_json;
            if (!t_config.empty()) cfg_json = load_json_file(t_config);
            // Desk-scale defaults for the synthetic corpus, full-scale for
            // real manifests; an explicit config overrides either baseline.
            std::string source = t_dataset;
            if (source.empty() && cfg_json.contains("dataset"))
                source = cfg_json["dataset"].value("source", "");
            rc.train = source == "synthetic" ? desk_train_config() : TrainConfig{};
            if (!cfg_json.is_null()) from_json_run(cfg_json, rc);
            if (!t_scheme.empty()) rc.train.scheme = t_scheme;
            if (t->count("--alpha")) rc.train.loss.alpha = t_alpha;
            if (t->count("--tau")) rc.train.loss.tau = t_tau;
            if (t->count("--lr")) rc.train.base_lr = t_lr;
            if (t->count("--epochs")) rc.train.epochs = t_epochs;
            if (t->count("--batch-size")) rc.train.batch_size = t_batch;
            if (t->count("--seed")) rc.train.seed = static_cast<std::uint64_t>(t_seed);
            if (!t_dataset.empty()) rc.dataset.source = t_dataset;
            if (t->count("--val-fold")) rc.val_fold = t_val_fold;
            if (t_cv) rc.cv = true;
            if (!t_out.empty()) rc.out_dir = t_out;
            return cmd_train(std::move(rc));
        }
        if (e->parsed()) {
            if (e_ckpt.empty() && e_ensemble.empty())
                throw ConfigError("eval: need --checkpoint or --ensemble");
            return cmd_eval(e_ckpt, e_dataset, e_fold, e_noise, e_sigmas, e_ensemble, e_margins, e_out);
        }
        if (fz->parsed()) return cmd_featurize(f_manifest, f_out, f_rate, f_seconds);
        if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck();
        if (sy->parsed()) return cmd_synth(s_out, s_seed);
    } catch (const ConfigError& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 1;
    } catch (const DataError& ex) {
        std::fprintf(stderr, "data error: %s\n", ex.what());
        return 2;
    } catch (const NumericError& ex) {
        std::fprintf(stderr, "numeric error: %s\n", ex.what());
        return 3;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 1;
}
