// gesture-diff: command-line front end for the gesture generation pipeline.
// Subcommands: make-synthetic, train, generate, eval, preview. Every run
// writes its fully resolved configuration next to its outputs; identical
// configs and seeds reproduce identical outputs.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <json.hpp>

#include "gdiff/audio_features.hpp"
#include "gdiff/clip_io.hpp"
#include "gdiff/generator.hpp"
#include "gdiff/metrics.hpp"
#include "gdiff/preview.hpp"
#include "gdiff/run_config.hpp"
#include "gdiff/synthetic.hpp"
#include "gdiff/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit code 2: invalid configuration or missing inputs.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw UsageError(what + " not found: " + path.string());
    }
}

gdiff::KeypointFrame load_source_keypoints(const fs::path& path) {
    require_exists(path, "source keypoints");
    gdiff::KeypointFrame frame;
    if (fs::is_directory(path)) {
        const gdiff::GestureClip clip = gdiff::read_clip(path);
        if (clip.keypoints.frames.empty()) throw UsageError("clip has no frames: " + path.string());
        return clip.keypoints.frames.front();
    }
    std::ifstream in(path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw UsageError("source keypoints file is not valid JSON: " + path.string());
    }
    const int k = j.at("K").get<int>();
    const auto& coords = j.at("coords");
    if (static_cast<int>(coords.size()) != k) {
        throw UsageError("source keypoints: coords length disagrees with K");
    }
    frame.coords.resize(2 * k);
    for (int i = 0; i < k; ++i) {
        frame.coords[2 * i] = coords[i][0].get<double>();
        frame.coords[2 * i + 1] = coords[i][1].get<double>();
    }
    return frame;
}

void apply_cli_override(gdiff::RunConfig& cfg, const CLI::App* cmd, const std::string& flag,
                        const std::string& key) {
    const CLI::Option* opt = cmd->get_option(flag);
    if (opt->count() > 0) {
        const std::string raw = opt->results().front();
        // Numbers stay numbers; everything else is a string.
        try {
            cfg.set(key, json::parse(raw));
        } catch (const json::parse_error&) {
            cfg.set(key, raw);
        }
    }
}

int cmd_make_synthetic(const CLI::App* cmd) {
    gdiff::RunConfig cfg({{"out", nullptr},
                          {"seed", 0},
                          {"synthetic.clips", 8},
                          {"synthetic.frames", 128},
                          {"synthetic.keypoints", 10}});
    if (cmd->get_option("--config")->count() > 0) {
        const fs::path p = cmd->get_option("--config")->results().front();
        require_exists(p, "config file");
        cfg.merge_file(p);
    }
    apply_cli_override(cfg, cmd, "--out", "out");
    apply_cli_override(cfg, cmd, "--seed", "seed");
    apply_cli_override(cfg, cmd, "--clips", "synthetic.clips");
    apply_cli_override(cfg, cmd, "--frames", "synthetic.frames");
    apply_cli_override(cfg, cmd, "--keypoints", "synthetic.keypoints");

    const fs::path out = cfg.get<std::string>("out");
    gdiff::SyntheticConfig scfg;
    scfg.num_clips = cfg.get<int>("synthetic.clips");
    scfg.frames_per_clip = cfg.get<int>("synthetic.frames");
    scfg.num_keypoints = cfg.get<int>("synthetic.keypoints");
    gdiff::make_synthetic_dataset(out, scfg, cfg.get<std::uint64_t>("seed"));
    cfg.write_resolved(out / "resolved_config.json", "make-synthetic");
    std::cout << "wrote " << scfg.num_clips << " clips to " << out.string() << "\n";
    return 0;
}

int cmd_train(const CLI::App* cmd) {
    gdiff::RunConfig cfg({{"data", nullptr},
                          {"out", nullptr},
                          {"seed", 0},
                          {"train.mode", "noise"},
                          {"train.steps", 20000},
                          {"train.batch", 64},
                          {"train.lr", 5e-4},
                          {"train.stride", 10},
                          {"train.p_uncond", 0.1},
                          {"train.frames", 34},
                          {"train.init_frames", 4},
                          {"train.hidden", 256},
                          {"train.blocks", 8},
                          {"train.heads", 8},
                          {"train.checkpoint_interval", 1000},
                          {"train.grad_clip", 1.0},
                          {"diffusion.timesteps", 500},
                          {"diffusion.beta_1", 1e-4},
                          {"diffusion.beta_T", 0.02},
                          {"resume", ""}});
    if (cmd->get_option("--config")->count() > 0) {
        const fs::path p = cmd->get_option("--config")->results().front();
        require_exists(p, "config file");
        cfg.merge_file(p);
    }
    for (const auto& [flag, key] :
         std::map<std::string, std::string>{{"--data", "data"},
                                            {"--out", "out"},
                                            {"--seed", "seed"},
                                            {"--mode", "train.mode"},
                                            {"--steps", "train.steps"},
                                            {"--batch", "train.batch"},
                                            {"--lr", "train.lr"},
                                            {"--hidden", "train.hidden"},
                                            {"--blocks", "train.blocks"},
                                            {"--heads", "train.heads"},
                                            {"--timesteps", "diffusion.timesteps"},
                                            {"--resume", "resume"}}) {
        apply_cli_override(cfg, cmd, flag, key);
    }

    const fs::path data = cfg.get<std::string>("data");
    require_exists(data, "dataset directory");
    require_exists(data / "stats.json", "dataset stats.json");
    const fs::path out = cfg.get<std::string>("out");
    fs::create_directories(out);

    gdiff::TrainConfig tc;
    const std::string mode = cfg.get<std::string>("train.mode");
    if (mode == "noise") {
        tc.prediction_mode = gdiff::PredictionMode::kNoise;
    } else if (mode == "sample") {
        tc.prediction_mode = gdiff::PredictionMode::kSample;
    } else {
        throw UsageError("train.mode must be 'noise' or 'sample', got '" + mode + "'");
    }
    tc.max_steps = cfg.get<std::int64_t>("train.steps");
    tc.batch_size = cfg.get<int>("train.batch");
    tc.lr = cfg.get<double>("train.lr");
    tc.stride = cfg.get<int>("train.stride");
    tc.p_uncond = cfg.get<double>("train.p_uncond");
    tc.num_frames = cfg.get<int>("train.frames");
    tc.num_init_frames = cfg.get<int>("train.init_frames");
    tc.hidden_dim = cfg.get<int>("train.hidden");
    tc.num_blocks = cfg.get<int>("train.blocks");
    tc.num_heads = cfg.get<int>("train.heads");
    tc.checkpoint_interval = cfg.get<std::int64_t>("train.checkpoint_interval");
    tc.grad_clip_norm = cfg.get<double>("train.grad_clip");
    tc.schedule_timesteps = cfg.get<int>("diffusion.timesteps");
    tc.schedule_beta_1 = cfg.get<double>("diffusion.beta_1");
    tc.schedule_beta_T = cfg.get<double>("diffusion.beta_T");
    tc.seed = cfg.get<std::uint64_t>("seed");
    try {
        tc.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }

    cfg.write_resolved(out / "resolved_config.json", "train");
    gdiff::write_schedule_json(out / "schedule.json",
                               gdiff::make_schedule(tc.schedule_timesteps, tc.schedule_beta_1,
                                                    tc.schedule_beta_T),
                               tc.schedule_beta_1, tc.schedule_beta_T);

    gdiff::TrainHooks hooks;
    hooks.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    hooks.on_step = [&](std::int64_t step, double loss, double null_fraction, double) {
        if (step % 100 == 0 || step == tc.max_steps) {
            std::cout << "step " << step << "/" << tc.max_steps << " loss " << loss
                      << " null_fraction " << null_fraction << "\n";
        }
    };

    std::optional<gdiff::Checkpoint> resume;
    const std::string resume_path = cfg.get<std::string>("resume");
    if (!resume_path.empty()) {
        require_exists(resume_path, "resume checkpoint");
        resume = gdiff::load_checkpoint(resume_path);
    }
    gdiff::train(data, tc, out, hooks, resume ? &*resume : nullptr);
    std::cout << "final checkpoint: " << (out / "checkpoint_final.ckpt").string() << "\n";
    return 0;
}

int cmd_generate(const CLI::App* cmd) {
    gdiff::RunConfig cfg({{"checkpoint", nullptr},
                          {"audio", nullptr},
                          {"source_keypoints", nullptr},
                          {"out", nullptr},
                          {"generate.s", 0.2},
                          {"seed", 0}});
    if (cmd->get_option("--config")->count() > 0) {
        const fs::path p = cmd->get_option("--config")->results().front();
        require_exists(p, "config file");
        cfg.merge_file(p);
    }
    apply_cli_override(cfg, cmd, "--checkpoint", "checkpoint");
    apply_cli_override(cfg, cmd, "--audio", "audio");
    apply_cli_override(cfg, cmd, "--source-keypoints", "source_keypoints");
    apply_cli_override(cfg, cmd, "--out", "out");
    apply_cli_override(cfg, cmd, "--s", "generate.s");
    apply_cli_override(cfg, cmd, "--seed", "seed");

    const fs::path ckpt_path = cfg.get<std::string>("checkpoint");
    require_exists(ckpt_path, "checkpoint");
    const fs::path audio_path = cfg.get<std::string>("audio");
    require_exists(audio_path, "audio file");
    const fs::path out = cfg.get<std::string>("out");
    fs::create_directories(out);

    const gdiff::Checkpoint ckpt = gdiff::load_checkpoint(ckpt_path);
    gdiff::GenerationRequest req;
    req.source_keypoints = load_source_keypoints(cfg.get<std::string>("source_keypoints"));
    req.audio = gdiff::load_wav(audio_path);
    req.guidance_s = cfg.get<double>("generate.s");
    req.seed = cfg.get<std::uint64_t>("seed");

    const gdiff::GeneratedSequence result = gdiff::generate_long(ckpt, req);
    gdiff::write_driving_json(out / "driving.json", result.keypoints);

    // Also emit the standard clip layout so eval can consume the output.
    gdiff::GestureClip clip;
    clip.id = "generated";
    clip.keypoints = result.keypoints;
    clip.audio = req.audio;
    gdiff::write_clip(out / "clip", clip);

    cfg.write_resolved(out / "resolved_config.json", "generate");
    std::cout << "generated " << result.keypoints.length() << " frames -> "
              << (out / "driving.json").string() << "\n";
    return 0;
}

int cmd_eval(const CLI::App* cmd) {
    gdiff::RunConfig cfg({{"data", nullptr},
                          {"gen", nullptr},
                          {"out", nullptr},
                          {"seed", 0},
                          {"eval.sigma_bc", 0.1},
                          {"eval.stride", 10},
                          {"eval.ae_steps", 2000},
                          {"eval.ae_latent", 32}});
    if (cmd->get_option("--config")->count() > 0) {
        const fs::path p = cmd->get_option("--config")->results().front();
        require_exists(p, "config file");
        cfg.merge_file(p);
    }
    apply_cli_override(cfg, cmd, "--data", "data");
    apply_cli_override(cfg, cmd, "--gen", "gen");
    apply_cli_override(cfg, cmd, "--out", "out");
    apply_cli_override(cfg, cmd, "--seed", "seed");
    apply_cli_override(cfg, cmd, "--sigma-bc", "eval.sigma_bc");

    const fs::path data = cfg.get<std::string>("data");
    require_exists(data / "stats.json", "dataset stats.json");
    const fs::path gen = cfg.get<std::string>("gen");
    require_exists(gen, "generated clips directory");
    const fs::path out = cfg.get<std::string>("out");
    fs::create_directories(out);

    const gdiff::NormalizationStats stats = gdiff::read_stats(data / "stats.json");

    // N-frame windows (stride from config) of both corpora, normalized.
    auto windows_of = [&](const fs::path& dir, int window, int stride) {
        std::vector<Eigen::MatrixXd> windows;
        auto dirs = gdiff::list_clip_dirs(dir);
        if (dirs.empty() && fs::exists(dir / "manifest.json")) dirs = {dir};
        for (const auto& cd : dirs) {
            const gdiff::GestureClip clip = gdiff::read_clip(cd);
            const Eigen::MatrixXd mat =
                gdiff::normalize(gdiff::sequence_to_matrix(clip.keypoints), stats);
            for (int s = 0; s + window <= mat.rows(); s += stride) {
                windows.push_back(mat.middleRows(s, window));
            }
        }
        return windows;
    };
    const int window = 34;
    const int stride = cfg.get<int>("eval.stride");
    const auto gt_windows = windows_of(data, window, stride);
    const auto gen_windows = windows_of(gen, window, stride);
    if (gt_windows.empty()) throw UsageError("no ground-truth windows in " + data.string());
    if (gen_windows.empty()) throw UsageError("no generated windows in " + gen.string());

    gdiff::AutoencoderConfig acfg;
    acfg.window = window;
    acfg.latent_dim = cfg.get<int>("eval.ae_latent");
    acfg.train_steps = cfg.get<int>("eval.ae_steps");
    double holdout_mse = 0.0;
    const gdiff::KeypointAutoencoder encoder =
        gdiff::train_autoencoder(gt_windows, acfg, cfg.get<std::uint64_t>("seed"), &holdout_mse);
    encoder.save(out / "autoencoder.json");

    const double div = gdiff::diversity(gen_windows, gt_windows, encoder);

    // BC per generated clip that carries audio.
    double bc_total = 0.0;
    int bc_clips = 0;
    auto gen_dirs = gdiff::list_clip_dirs(gen);
    if (gen_dirs.empty() && fs::exists(gen / "manifest.json")) gen_dirs = {gen};
    for (const auto& cd : gen_dirs) {
        const gdiff::GestureClip clip = gdiff::read_clip(cd);
        if (clip.audio.samples.empty()) continue;
        const gdiff::Waveform wav = gdiff::to_mono_16k({clip.audio.samples}, clip.audio.sample_rate);
        gdiff::BeatAlignment align;
        align.audio_beats = gdiff::detect_audio_beats(wav);
        if (align.audio_beats.times.empty()) continue;
        align.motion_beats = gdiff::detect_motion_beats(clip.keypoints);
        align.sigma_bc = cfg.get<double>("eval.sigma_bc");
        bc_total += gdiff::beat_consistency(align);
        ++bc_clips;
    }

    json report{{"div", div},
                {"bc", bc_clips > 0 ? bc_total / bc_clips : 0.0},
                {"num_clips", static_cast<int>(gen_dirs.size())},
                {"num_bc_clips", bc_clips},
                {"ae_holdout_mse", holdout_mse},
                {"config",
                 {{"sigma_bc", cfg.get<double>("eval.sigma_bc")},
                  {"window", window},
                  {"stride", stride},
                  {"ae_latent", acfg.latent_dim},
                  {"ae_steps", acfg.train_steps}}}};
    std::ofstream rf(out / "metrics.json");
    rf << report.dump(2) << "\n";
    std::cout << report.dump() << "\n";
    cfg.write_resolved(out / "resolved_config.json", "eval");
    return 0;
}

int cmd_preview(const CLI::App* cmd) {
    gdiff::RunConfig cfg({{"driving", nullptr},
                          {"source_image", nullptr},
                          {"source_keypoints", nullptr},
                          {"out", nullptr},
                          {"preview.lambda", 1e-3},
                          {"preview.overlay", true}});
    if (cmd->get_option("--config")->count() > 0) {
        const fs::path p = cmd->get_option("--config")->results().front();
        require_exists(p, "config file");
        cfg.merge_file(p);
    }
    apply_cli_override(cfg, cmd, "--driving", "driving");
    apply_cli_override(cfg, cmd, "--source-image", "source_image");
    apply_cli_override(cfg, cmd, "--source-keypoints", "source_keypoints");
    apply_cli_override(cfg, cmd, "--out", "out");
    apply_cli_override(cfg, cmd, "--lambda", "preview.lambda");

    const fs::path driving_path = cfg.get<std::string>("driving");
    require_exists(driving_path, "driving.json");
    const fs::path image_path = cfg.get<std::string>("source_image");
    require_exists(image_path, "source image");
    const fs::path out = cfg.get<std::string>("out");
    fs::create_directories(out);

    const gdiff::KeypointSequence driving = gdiff::read_driving_json(driving_path);
    const gdiff::KeypointFrame source_kp =
        load_source_keypoints(cfg.get<std::string>("source_keypoints"));
    const gdiff::ImageGrid source = gdiff::png_read(image_path);

    gdiff::PreviewOptions opts;
    opts.lambda = cfg.get<double>("preview.lambda");
    opts.overlay_keypoints = cfg.get<bool>("preview.overlay");
    const auto warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    const gdiff::PreviewResult res =
        gdiff::preview_sequence(source, source_kp, driving, out, opts, warn);
    gdiff::export_frames_manifest(out, driving.fps, warn);
    cfg.write_resolved(out / "resolved_config.json", "preview");
    std::cout << "wrote " << res.frames_written << " frames (" << res.frames_skipped
              << " skipped) to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audio-driven co-speech gesture generation over TPS keypoints"};
    app.require_subcommand(1);

    auto add_config = [](CLI::App* cmd) { cmd->add_option("--config", "JSON config file"); };

    CLI::App* mk = app.add_subcommand("make-synthetic", "Generate the synthetic audio-coupled dataset");
    add_config(mk);
    mk->add_option("--out", "output dataset directory")->required();
    mk->add_option("--seed", "RNG seed");
    mk->add_option("--clips", "number of clips");
    mk->add_option("--frames", "frames per clip");
    mk->add_option("--keypoints", "keypoints per frame");

    CLI::App* tr = app.add_subcommand("train", "Train the diffusion denoiser");
    add_config(tr);
    tr->add_option("--data", "dataset directory")->required();
    tr->add_option("--out", "run output directory")->required();
    tr->add_option("--seed", "RNG seed");
    tr->add_option("--mode", "prediction mode: noise | sample");
    tr->add_option("--steps", "training steps");
    tr->add_option("--batch", "batch size");
    tr->add_option("--lr", "learning rate");
    tr->add_option("--hidden", "transformer width");
    tr->add_option("--blocks", "transformer blocks");
    tr->add_option("--heads", "attention heads");
    tr->add_option("--timesteps", "diffusion timesteps T");
    tr->add_option("--resume", "checkpoint to resume from");

    CLI::App* ge = app.add_subcommand("generate", "Generate a gesture sequence for an audio file");
    add_config(ge);
    ge->add_option("--checkpoint", "trained checkpoint")->required();
    ge->add_option("--audio", "driving audio (wav)")->required();
    ge->add_option("--source-keypoints", "source pose: clip dir or JSON {K, coords}")->required();
    ge->add_option("--out", "output directory")->required();
    ge->add_option("--s", "classifier-free guidance scale");
    ge->add_option("--seed", "RNG seed");

    CLI::App* ev = app.add_subcommand("eval", "Diversity and beat-consistency metrics");
    add_config(ev);
    ev->add_option("--data", "ground-truth dataset directory")->required();
    ev->add_option("--gen", "generated clips directory")->required();
    ev->add_option("--out", "output directory")->required();
    ev->add_option("--seed", "autoencoder training seed");
    ev->add_option("--sigma-bc", "BC kernel width in seconds");

    CLI::App* pv = app.add_subcommand("preview", "Render a TPS warp preview of a driving sequence");
    add_config(pv);
    pv->add_option("--driving", "driving.json produced by generate")->required();
    pv->add_option("--source-image", "source PNG image")->required();
    pv->add_option("--source-keypoints", "source pose: clip dir or JSON {K, coords}")->required();
    pv->add_option("--out", "output directory")->required();
    pv->add_option("--lambda", "TPS regularization");

    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (overrides GESTURE_DIFF_THREADS)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (threads > 0) {
        setenv("GESTURE_DIFF_THREADS", std::to_string(threads).c_str(), 1);
    }

    try {
        if (mk->parsed()) return cmd_make_synthetic(mk);
        if (tr->parsed()) return cmd_train(tr);
        if (ge->parsed()) return cmd_generate(ge);
        if (ev->parsed()) return cmd_eval(ev);
        if (pv->parsed()) return cmd_preview(pv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
