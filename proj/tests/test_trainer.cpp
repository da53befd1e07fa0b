#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "soundclr/checkpoint.hpp"
#include "soundclr/synth.hpp"
#include "soundclr/trainer.hpp"

using namespace soundclr;
namespace fs = std::filesystem;

namespace {

// Small in-memory corpus + config that a single core trains in well under a
// second per epoch.
Dataset tiny_dataset() {
    SynthSpec spec;
    spec.classes = {
        {SynthClass::Tone, "tone300", 300.0, 0.0},
        {SynthClass::Chord, "chord500_750", 500.0, 750.0},
        {SynthClass::Chirp, "chirp200_1500", 200.0, 1500.0},
    };
    spec.samples_per_class = 8;
    spec.clip_seconds = 0.4;
    spec.sample_rate = 16384;
    spec.folds = 2;
    spec.seed = 3;
    return generate(spec);
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.scheme = "hybrid";
    cfg.epochs = 4;
    cfg.batch_size = 6;
    cfg.base_lr = 1e-3;
    cfg.warmup_epochs = 1;
    cfg.seed = 11;
    cfg.stft.n_mels = 32;
    cfg.augment.target_len = 1024 + 512 * 7; // 8 frames
    cfg.augment.freq_mask_width = 8;
    cfg.augment.time_mask_width = 4;
    cfg.model.conv_channels = {4};
    cfg.model.repr_dim = 16;
    cfg.model.proj_dim = 8;
    cfg.model.num_classes = 3;
    return cfg;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, t] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second.data != t.data) return false;
    }
    return true;
}

} // namespace

TEST_CASE("lr schedule warms up linearly then decays exponentially") {
    REQUIRE(lr_at(0, 1.0, 4, 0.9) == 0.25);
    REQUIRE(lr_at(1, 1.0, 4, 0.9) == 0.5);
    REQUIRE(lr_at(3, 1.0, 4, 0.9) == 1.0);
    REQUIRE(lr_at(4, 1.0, 4, 0.9) == 1.0); // decay exponent starts at zero
    REQUIRE(lr_at(5, 1.0, 4, 0.9) == Catch::Approx(0.9).margin(1e-15));
    REQUIRE(lr_at(7, 1.0, 4, 0.9) == Catch::Approx(0.9 * 0.9 * 0.9).margin(1e-15));
    REQUIRE(lr_at(0, 2e-3, 1, 0.98) == 2e-3); // warmup of one epoch starts at base_lr
}

TEST_CASE("adam_step matches the hand-worked first two updates") {
    ParamSet params;
    Tensor p({2});
    p.data = {1.0, -1.0};
    params.emplace("w", p);
    OptimizerState st = OptimizerState::zeros_like(params);
    AdamConfig ac; // 0.9 / 0.999 / 1e-8

    GradSet g1;
    Tensor t1({2});
    t1.data = {0.5, -2.0};
    g1.emplace("w", t1);
    adam_step(params, g1, st, 0.1, {"w"}, ac);
    REQUIRE(st.step == 1);
    // after bias correction the first step is lr * g/(|g| + eps) ~ lr * sign(g)
    REQUIRE(params.at("w").data[0] == Catch::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).margin(1e-12));
    REQUIRE(params.at("w").data[1] == Catch::Approx(-1.0 + 0.1 * 2.0 / (2.0 + 1e-8)).margin(1e-12));

    // second step: replicate the recurrences directly
    const double m1 = 0.1 * 0.5, v1 = 0.001 * 0.25;
    GradSet g2;
    Tensor t2({2});
    t2.data = {1.0, 0.0};
    g2.emplace("w", t2);
    const double before = params.at("w").data[0];
    adam_step(params, g2, st, 0.1, {"w"}, ac);
    const double m2 = 0.9 * m1 + 0.1 * 1.0;
    const double v2 = 0.999 * v1 + 0.001 * 1.0;
    const double mhat = m2 / (1.0 - 0.9 * 0.9);
    const double vhat = v2 / (1.0 - 0.999 * 0.999);
    REQUIRE(params.at("w").data[0] == Catch::Approx(before - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).margin(1e-12));
}

TEST_CASE("adam_step leaves frozen parameters and their moments untouched") {
    ParamSet params;
    Tensor a({2}), b({2});
    a.data = {1.0, 2.0};
    b.data = {3.0, 4.0};
    params.emplace("train.w", a);
    params.emplace("frozen.w", b);
    OptimizerState st = OptimizerState::zeros_like(params);
    GradSet g;
    Tensor ga({2}), gb({2});
    ga.data = {1.0, 1.0};
    gb.data = {5.0, 5.0}; // present but must be ignored
    g.emplace("train.w", ga);
    g.emplace("frozen.w", gb);
    adam_step(params, g, st, 0.1, {"train.w"});
    REQUIRE(params.at("frozen.w").data == std::vector<double>{3.0, 4.0});
    REQUIRE(st.m.at("frozen.w").data == std::vector<double>{0.0, 0.0});
    REQUIRE(st.v.at("frozen.w").data == std::vector<double>{0.0, 0.0});
    REQUIRE(params.at("train.w").data != std::vector<double>{1.0, 2.0});
}

TEST_CASE("adam_step rejects non-finite gradients") {
    ParamSet params;
    Tensor p({1});
    params.emplace("w", p);
    OptimizerState st = OptimizerState::zeros_like(params);
    GradSet g;
    Tensor t({1});
    t.data = {std::numeric_limits<double>::quiet_NaN()};
    g.emplace("w", t);
    CHECK_THROWS_AS(adam_step(params, g, st, 0.1, {"w"}), NumericError);
}

TEST_CASE("stratified batches give every present class at least two members") {
    std::vector<int> labels;
    std::vector<int> indices;
    for (int i = 0; i < 60; ++i) {
        labels.push_back(i % 5);
        indices.push_back(i);
    }
    Rng rng(17);
    const auto batches = stratified_batches(indices, labels, 12, rng);
    REQUIRE(batches.size() == 5); // 60 / 12
    for (const auto& batch : batches) {
        REQUIRE(batch.size() >= 12);
        std::map<int, int> per_class;
        for (int i : batch) {
            REQUIRE(i >= 0);
            REQUIRE(i < 60);
            per_class[labels[static_cast<std::size_t>(i)]]++;
        }
        for (const auto& [c, n] : per_class) REQUIRE(n >= 2);
    }

    // deterministic under the same generator seed
    Rng r1(21), r2(21);
    REQUIRE(stratified_batches(indices, labels, 12, r1) == stratified_batches(indices, labels, 12, r2));

    // more classes than fit: only batch_size/2 distinct classes per batch
    std::vector<int> many_labels, many_idx;
    for (int i = 0; i < 40; ++i) {
        many_labels.push_back(i % 10);
        many_idx.push_back(i);
    }
    Rng r3(5);
    const auto small = stratified_batches(many_idx, many_labels, 4, r3);
    for (const auto& batch : small) {
        std::set<int> cls;
        for (int i : batch) cls.insert(many_labels[static_cast<std::size_t>(i)]);
        REQUIRE(cls.size() <= 2);
        std::map<int, int> per_class;
        for (int i : batch) per_class[many_labels[static_cast<std::size_t>(i)]]++;
        for (const auto& [c, n] : per_class) REQUIRE(n >= 2);
    }
}

TEST_CASE("checkpoints round-trip bit exactly") {
    const fs::path dir = fs::temp_directory_path() / "soundclr_test_trainer";
    fs::create_directories(dir);
    const fs::path p = dir / "ckpt.sckp";

    Checkpoint ck;
    ck.config = tiny_config();
    Model model(ck.config.model);
    Rng rng(9);
    model.init(rng);
    ck.params = model.params;
    ck.opt = OptimizerState::zeros_like(model.params);
    ck.opt.step = 42;
    for (auto& [name, t] : ck.opt.m)
        for (double& v : t.data) v = rng.gaussian();
    ck.next_epoch = 3;
    ck.seed = 77;

    save_checkpoint(ck, p.string());
    const Checkpoint back = load_checkpoint(p.string());
    REQUIRE(back.next_epoch == 3);
    REQUIRE(back.seed == 77);
    REQUIRE(back.opt.step == 42);
    REQUIRE(same_params(back.params, ck.params));
    REQUIRE(same_params(back.opt.m, ck.opt.m));
    REQUIRE(same_params(back.opt.v, ck.opt.v));
    REQUIRE(back.config.scheme == ck.config.scheme);
    REQUIRE(back.config.seed == ck.config.seed);
    REQUIRE(back.config.model.num_classes == ck.config.model.num_classes);

    // identical inputs produce identical bytes
    const fs::path p2 = dir / "ckpt2.sckp";
    save_checkpoint(ck, p2.string());
    std::ifstream f1(p, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    REQUIRE(s1.str() == s2.str());

    // corruption is detected
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_AS(load_checkpoint(p.string()), DataError);
    fs::resize_file(p2, fs::file_size(p2) - 16);
    CHECK_THROWS_AS(load_checkpoint(p2.string()), DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.sckp").string()), DataError);
}

TEST_CASE("TrainConfig JSON round trip preserves every field") {
    TrainConfig cfg = tiny_config();
    cfg.scheme = "two_stage_contrastive";
    cfg.stage1_epochs = 3;
    cfg.loss.tau = 0.25;
    cfg.loss.alpha = 0.75;
    cfg.loss.self_in_numerator = true;
    cfg.stft.standardize = true;
    const json j = cfg;
    const TrainConfig back = j.get<TrainConfig>();
    REQUIRE(back.scheme == cfg.scheme);
    REQUIRE(back.epochs == cfg.epochs);
    REQUIRE(back.stage1_epochs == cfg.stage1_epochs);
    REQUIRE(back.batch_size == cfg.batch_size);
    REQUIRE(back.base_lr == cfg.base_lr);
    REQUIRE(back.decay_factor == cfg.decay_factor);
    REQUIRE(back.warmup_epochs == cfg.warmup_epochs);
    REQUIRE(back.seed == cfg.seed);
    REQUIRE(back.loss.tau == cfg.loss.tau);
    REQUIRE(back.loss.alpha == cfg.loss.alpha);
    REQUIRE(back.loss.self_in_numerator == cfg.loss.self_in_numerator);
    REQUIRE(back.augment.target_len == cfg.augment.target_len);
    REQUIRE(back.augment.freq_mask_width == cfg.augment.freq_mask_width);
    REQUIRE(back.stft.n_mels == cfg.stft.n_mels);
    REQUIRE(back.stft.standardize == cfg.stft.standardize);
    REQUIRE(back.model.conv_channels == cfg.model.conv_channels);
    REQUIRE(back.model.num_classes == cfg.model.num_classes);

    // defaults fill in for missing keys
    const TrainConfig partial = json::parse(R"({"epochs": 7})").get<TrainConfig>();
    REQUIRE(partial.epochs == 7);
    REQUIRE(partial.scheme == "hybrid");
    REQUIRE(partial.batch_size == 128);
}

TEST_CASE("TrainConfig validation catches bad settings") {
    TrainConfig bad = tiny_config();
    bad.scheme = "sgd";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_config();
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_config();
    bad.loss.tau = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_config();
    bad.model.num_classes = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(tiny_config().validate());

    REQUIRE(tiny_config().stage1_count() == 3); // 70% of 4, rounded
    TrainConfig explicit_split = tiny_config();
    explicit_split.stage1_epochs = 1;
    REQUIRE(explicit_split.stage1_count() == 1);
}

TEST_CASE("training is deterministic given config and seed") {
    const Dataset ds = tiny_dataset();
    const TrainConfig cfg = tiny_config();
    const std::vector<int> tr = ds.except_fold_indices(2), va = ds.fold_indices(2);
    const TrainResult a = train(ds, cfg, tr, va);
    const TrainResult b = train(ds, cfg, tr, va);
    REQUIRE(same_params(a.final.params, b.final.params));
    REQUIRE(a.history.size() == 4);
    REQUIRE(a.best_epoch == b.best_epoch);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        REQUIRE(a.history[i].train_loss == b.history[i].train_loss);
        REQUIRE(a.history[i].val_acc == b.history[i].val_acc);
        REQUIRE(std::isfinite(a.history[i].train_loss));
        REQUIRE(a.history[i].val_acc >= 0.0);
        REQUIRE(a.history[i].val_acc <= 1.0);
    }
}

TEST_CASE("hybrid at alpha 0 reproduces the ce scheme bit for bit") {
    const Dataset ds = tiny_dataset();
    const std::vector<int> tr = ds.except_fold_indices(2), va = ds.fold_indices(2);

    TrainConfig ce_cfg = tiny_config();
    ce_cfg.scheme = "ce";
    TrainConfig hy_cfg = tiny_config();
    hy_cfg.scheme = "hybrid";
    hy_cfg.loss.alpha = 0.0;

    const TrainResult ce_run = train(ds, ce_cfg, tr, va);
    const TrainResult hy_run = train(ds, hy_cfg, tr, va);
    REQUIRE(same_params(ce_run.final.params, hy_run.final.params));
    for (std::size_t i = 0; i < ce_run.history.size(); ++i) {
        REQUIRE(ce_run.history[i].train_loss == hy_run.history[i].train_loss);
        REQUIRE(ce_run.history[i].val_loss == hy_run.history[i].val_loss);
        REQUIRE(ce_run.history[i].val_acc == hy_run.history[i].val_acc);
    }
}

TEST_CASE("a resumed run continues exactly where the full run would be") {
    const Dataset ds = tiny_dataset();
    const TrainConfig cfg = tiny_config();
    const std::vector<int> tr = ds.except_fold_indices(2), va = ds.fold_indices(2);

    const TrainResult full = train(ds, cfg, tr, va);
    const TrainResult head = train(ds, cfg, tr, va, nullptr, 2);
    REQUIRE(head.final.next_epoch == 2);

    // round-trip the checkpoint through disk like the CLI does
    const fs::path dir = fs::temp_directory_path() / "soundclr_test_trainer";
    fs::create_directories(dir);
    const fs::path p = dir / "resume.sckp";
    save_checkpoint(head.final, p.string());
    const Checkpoint loaded = load_checkpoint(p.string());

    const TrainResult tail = train(ds, cfg, tr, va, &loaded);
    REQUIRE(same_params(tail.final.params, full.final.params));
    REQUIRE(tail.final.opt.step == full.final.opt.step);
    REQUIRE(tail.history.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(tail.history[i].train_loss == full.history[i + 2].train_loss);
        REQUIRE(tail.history[i].val_acc == full.history[i + 2].val_acc);
    }
}

TEST_CASE("two-stage training freezes the encoder in stage two") {
    const Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config();
    cfg.scheme = "two_stage_contrastive";
    cfg.epochs = 3;
    cfg.stage1_epochs = 2;
    const std::vector<int> tr = ds.except_fold_indices(2), va = ds.fold_indices(2);

    const TrainResult head = train(ds, cfg, tr, va, nullptr, 2); // exactly stage 1
    const TrainResult full = train(ds, cfg, tr, va);

    for (const auto& [name, t] : full.final.params) {
        const bool is_classifier = name.rfind("classifier.", 0) == 0;
        if (is_classifier) continue;
        // encoder and projection must be untouched by the stage-2 epoch
        REQUIRE(t.data == head.final.params.at(name).data);
    }
    // the classifier did move in stage 2
    REQUIRE(full.final.params.at("classifier.W").data != head.final.params.at("classifier.W").data);

    // stage-1 epochs never touch the classifier either
    Model fresh(cfg.model);
    Rng init_rng = Rng::derive(cfg.seed, {kStreamInit});
    fresh.init(init_rng);
    REQUIRE(head.final.params.at("classifier.W").data == fresh.params.at("classifier.W").data);

    // the lr schedule restarts at the stage boundary
    REQUIRE(full.history[2].lr == lr_at(0, cfg.base_lr, cfg.warmup_epochs, cfg.decay_factor));
}

TEST_CASE("train rejects empty splits") {
    const Dataset ds = tiny_dataset();
    const TrainConfig cfg = tiny_config();
    CHECK_THROWS_AS(train(ds, cfg, {}, ds.fold_indices(2)), DataError);
    CHECK_THROWS_AS(train(ds, cfg, ds.except_fold_indices(2), {}), DataError);
}

TEST_CASE("cross_validate covers every fold once") {
    const Dataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config();
    cfg.epochs = 2;
    const CrossValidation cv = cross_validate(ds, cfg);
    REQUIRE(cv.folds.size() == 2);
    REQUIRE(cv.folds[0].fold == 1);
    REQUIRE(cv.folds[1].fold == 2);
    const double mean = (cv.folds[0].metrics.accuracy + cv.folds[1].metrics.accuracy) / 2.0;
    REQUIRE(cv.mean_accuracy == Catch::Approx(mean).margin(1e-15));
    REQUIRE(std::isfinite(cv.std_accuracy));

    Dataset one_fold = ds;
    one_fold.num_folds = 1;
    CHECK_THROWS_AS(cross_validate(one_fold, cfg), DataError);
}

TEST_CASE("write_metrics_csv emits one row per epoch") {
    const fs::path dir = fs::temp_directory_path() / "soundclr_test_trainer";
    fs::create_directories(dir);
    const fs::path p = dir / "metrics.csv";
    std::vector<EpochMetrics> hist(3);
    for (int i = 0; i < 3; ++i) {
        hist[static_cast<std::size_t>(i)].epoch = i;
        hist[static_cast<std::size_t>(i)].lr = 0.001 * (i + 1);
        hist[static_cast<std::size_t>(i)].train_loss = 1.0 / (i + 1);
    }
    write_metrics_csv(p.string(), hist);
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    REQUIRE(line == "epoch,lr,train_loss,train_acc,val_loss,val_acc");
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 3);
}
