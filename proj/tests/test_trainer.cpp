#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gdiff/clip_io.hpp"
#include "gdiff/metrics.hpp"
#include "gdiff/synthetic.hpp"
#include "gdiff/trainer.hpp"

using namespace gdiff;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Writes a dataset of bare clips (silent audio) with the given lengths.
void write_plain_dataset(const fs::path& dir, const std::vector<int>& clip_frames, int k) {
    Rng rng(123);
    std::vector<KeypointSequence> seqs;
    for (size_t i = 0; i < clip_frames.size(); ++i) {
        GestureClip clip;
        clip.id = "c" + std::to_string(i);
        clip.keypoints.fps = 25.0;
        clip.keypoints.frames.resize(clip_frames[i]);
        for (auto& f : clip.keypoints.frames) {
            f.coords = Eigen::VectorXd::NullaryExpr(
                2 * k, [&](Eigen::Index) { return 0.5 + 0.1 * rng.gaussian(); });
        }
        clip.audio.sample_rate = 16000.0;
        clip.audio.samples.assign(static_cast<size_t>(clip_frames[i] / 25.0 * 16000.0), 0.0);
        write_clip(dir / clip.id, clip);
        seqs.push_back(clip.keypoints);
    }
    write_stats(dir / "stats.json", compute_stats(seqs));
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.num_frames = 8;
    cfg.num_init_frames = 2;
    cfg.stride = 10;
    cfg.batch_size = 4;
    cfg.hidden_dim = 16;
    cfg.num_blocks = 1;
    cfg.num_heads = 2;
    cfg.schedule_timesteps = 20;
    cfg.checkpoint_interval = 0;
    return cfg;
}

}  // namespace

TEST_CASE("window_dataset computes the forced window starts") {
    const auto dir = fresh_dir("gdiff_windows");
    write_plain_dataset(dir, {64}, 2);
    TrainConfig cfg;
    cfg.num_frames = 34;
    cfg.num_init_frames = 4;
    cfg.stride = 10;
    const NormalizationStats stats = read_stats(dir / "stats.json");
    const auto windows = window_dataset(dir, stats, cfg);
    CHECK(windows.size() == 4);  // starts 0, 10, 20, 30

    // Window invariant: init frames are exactly the first M rows.
    for (const auto& w : windows) {
        CHECK((w.context.init_frames - w.x0.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(w.context.audio.rows() == 34);
        CHECK(w.context.audio.cols() == 32);
    }
    fs::remove_all(dir);
}

TEST_CASE("window_dataset skips short clips with a warning") {
    const auto dir = fresh_dir("gdiff_windows_short");
    write_plain_dataset(dir, {33, 40}, 1);
    TrainConfig cfg;
    cfg.num_frames = 34;
    cfg.num_init_frames = 4;
    std::vector<std::string> warnings;
    const NormalizationStats stats = read_stats(dir / "stats.json");
    const auto windows =
        window_dataset(dir, stats, cfg, [&](const std::string& m) { warnings.push_back(m); });
    CHECK(windows.size() == 1);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("33") != std::string::npos);

    // All clips too short -> error.
    const auto dir2 = fresh_dir("gdiff_windows_empty");
    write_plain_dataset(dir2, {10}, 1);
    const NormalizationStats stats2 = read_stats(dir2 / "stats.json");
    CHECK_THROWS(window_dataset(dir2, stats2, cfg));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("window_dataset yields 100 windows on a 1024-frame clip") {
    const auto dir = fresh_dir("gdiff_windows_long");
    write_plain_dataset(dir, {1024}, 1);
    TrainConfig cfg;
    cfg.num_frames = 34;
    cfg.num_init_frames = 4;
    cfg.stride = 10;
    const NormalizationStats stats = read_stats(dir / "stats.json");
    CHECK(window_dataset(dir, stats, cfg).size() == 100);  // starts 0..990
    fs::remove_all(dir);
}

TEST_CASE("train_step honors p_uncond = 1 and p_uncond = 0") {
    const auto dir = fresh_dir("gdiff_step");
    write_plain_dataset(dir, {30}, 1);
    TrainConfig cfg = tiny_train_config();
    const NormalizationStats stats = read_stats(dir / "stats.json");
    const auto windows = window_dataset(dir, stats, cfg);
    const Denoiser model(cfg.denoiser_config(2));
    const DiffusionSchedule sched = make_schedule(cfg.schedule_timesteps, 1e-4, 0.02);

    std::vector<const TrainingWindow*> batch;
    for (const auto& w : windows) batch.push_back(&w);

    cfg.p_uncond = 1.0;
    Eigen::VectorXd params = model.init_params(0);
    AdamState adam;
    Rng rng(1);
    StepResult res = train_step(model, params, batch, sched, cfg, rng, adam);
    CHECK(res.null_count == res.batch);

    cfg.p_uncond = 0.0;
    Rng rng2(1);
    res = train_step(model, params, batch, sched, cfg, rng2, adam);
    CHECK(res.null_count == 0);
    fs::remove_all(dir);
}

TEST_CASE("fixed seed reproduces the loss trajectory") {
    const auto dir = fresh_dir("gdiff_train_det");
    write_plain_dataset(dir, {40}, 1);
    TrainConfig cfg = tiny_train_config();
    cfg.max_steps = 5;
    cfg.seed = 7;

    auto run = [&](const fs::path& out) {
        std::vector<double> losses;
        TrainHooks hooks;
        hooks.on_step = [&](std::int64_t, double loss, double, double) { losses.push_back(loss); };
        train(dir, cfg, out, hooks);
        return losses;
    };
    const auto l1 = run(fresh_dir("gdiff_train_det_out1"));
    const auto l2 = run(fresh_dir("gdiff_train_det_out2"));
    REQUIRE(l1.size() == 5);
    REQUIRE(l2.size() == 5);
    for (size_t i = 0; i < l1.size(); ++i) CHECK(l1[i] == l2[i]);
    // Training moves the parameters: losses are not all equal.
    CHECK(l1.front() != l1.back());
    fs::remove_all(dir);
}

TEST_CASE("max_steps = 0 leaves the checkpoint at initialization") {
    const auto dir = fresh_dir("gdiff_train_zero");
    write_plain_dataset(dir, {40}, 1);
    TrainConfig cfg = tiny_train_config();
    cfg.max_steps = 0;
    cfg.seed = 3;
    const auto out = fresh_dir("gdiff_train_zero_out");
    const Checkpoint ckpt = train(dir, cfg, out);
    const Denoiser model(cfg.denoiser_config(2));
    const Eigen::VectorXd init = model.init_params(splitmix64(cfg.seed));
    CHECK((ckpt.params - init).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ckpt.step == 0);
    fs::remove_all(dir);
    fs::remove_all(out);
}

TEST_CASE("resuming reproduces the uninterrupted trajectory") {
    const auto dir = fresh_dir("gdiff_train_resume");
    write_plain_dataset(dir, {40}, 1);
    TrainConfig cfg = tiny_train_config();
    cfg.seed = 11;

    // Uninterrupted: 6 steps.
    cfg.max_steps = 6;
    std::vector<double> full_losses;
    TrainHooks hooks;
    hooks.on_step = [&](std::int64_t, double loss, double, double) { full_losses.push_back(loss); };
    train(dir, cfg, fresh_dir("gdiff_resume_full"), hooks);

    // Interrupted at 4, then resumed to 6.
    cfg.max_steps = 4;
    const auto part_out = fresh_dir("gdiff_resume_part");
    const Checkpoint part = train(dir, cfg, part_out);
    CHECK(part.step == 4);

    cfg.max_steps = 6;
    std::vector<double> resumed_losses;
    TrainHooks hooks2;
    hooks2.on_step = [&](std::int64_t, double loss, double, double) {
        resumed_losses.push_back(loss);
    };
    train(dir, cfg, fresh_dir("gdiff_resume_cont"), hooks2, &part);
    REQUIRE(resumed_losses.size() == 2);
    CHECK(resumed_losses[0] == full_losses[4]);
    CHECK(resumed_losses[1] == full_losses[5]);
    fs::remove_all(dir);
}

TEST_CASE("synthetic dataset is bitwise deterministic") {
    SyntheticConfig cfg;
    cfg.num_clips = 2;
    cfg.frames_per_clip = 50;
    cfg.num_keypoints = 4;
    const auto d1 = fresh_dir("gdiff_syn1");
    const auto d2 = fresh_dir("gdiff_syn2");
    make_synthetic_dataset(d1, cfg, 42);
    make_synthetic_dataset(d2, cfg, 42);

    for (const char* name : {"clip_0000/keypoints.bin", "clip_0000/audio.wav",
                             "clip_0001/keypoints.bin", "stats.json"}) {
        std::ifstream a(d1 / name, std::ios::binary), b(d2 / name, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        CHECK(!sa.empty());
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("synthetic motion pauses at the ground-truth beats") {
    SyntheticConfig cfg;
    cfg.num_clips = 4;
    cfg.frames_per_clip = 128;
    cfg.num_keypoints = 6;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SyntheticClipTruth truth;
        const GestureClip clip = make_synthetic_clip(cfg, 100 + seed, &truth);
        const BeatList motion = detect_motion_beats(clip.keypoints);
        const double duration = cfg.frames_per_clip / cfg.fps;
        for (const double b : truth.beat_times) {
            if (b < 3.0 / cfg.fps || b > duration - 3.0 / cfg.fps) continue;  // interior only
            double best = 1e9;
            for (const double m : motion.times) best = std::min(best, std::abs(m - b));
            CHECK(best <= 1.0 / cfg.fps + 1e-9);
        }
        // Audio onsets land near the ground-truth beats too.
        const BeatList audio = detect_audio_beats(clip.audio);
        CHECK(audio.times.size() >= truth.beat_times.size() - 1);
        for (const double a : audio.times) {
            double best = 1e9;
            for (const double b : truth.beat_times) best = std::min(best, std::abs(a - b));
            CHECK(best < 0.04);
        }
    }
}

TEST_CASE("synthetic keypoint stats are finite and non-degenerate") {
    SyntheticConfig cfg;
    cfg.num_clips = 3;
    cfg.frames_per_clip = 64;
    cfg.num_keypoints = 5;
    const auto dir = fresh_dir("gdiff_syn_stats");
    make_synthetic_dataset(dir, cfg, 9);
    const NormalizationStats stats = read_stats(dir / "stats.json");
    CHECK(stats.mean.allFinite());
    CHECK(stats.stddev.allFinite());
    CHECK(stats.stddev.minCoeff() > kStdFloor);
    fs::remove_all(dir);
}

TEST_CASE("keypoints stay inside the unit square") {
    SyntheticConfig cfg;
    cfg.num_clips = 1;
    cfg.frames_per_clip = 200;
    cfg.num_keypoints = 8;
    const GestureClip clip = make_synthetic_clip(cfg, 5);
    for (const auto& f : clip.keypoints.frames) {
        CHECK(f.coords.minCoeff() >= 0.0);
        CHECK(f.coords.maxCoeff() <= 1.0);
    }
    CHECK(validate_clip(clip).empty());
}
