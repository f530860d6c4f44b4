#include "gdiff/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "gdiff/audio_features.hpp"
#include "gdiff/clip_io.hpp"
#include "gdiff/threading.hpp"

namespace gdiff {

void TrainConfig::validate() const {
    if (p_uncond < 0.0 || p_uncond > 1.0) throw std::invalid_argument("train config: p_uncond in [0,1]");
    if (stride < 1) throw std::invalid_argument("train config: stride >= 1");
    if (num_init_frames >= num_frames) throw std::invalid_argument("train config: M < N required");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size >= 1");
    if (lr <= 0.0) throw std::invalid_argument("train config: lr > 0");
}

DenoiserConfig TrainConfig::denoiser_config(int frame_dim) const {
    DenoiserConfig d;
    d.hidden_dim = hidden_dim;
    d.num_blocks = num_blocks;
    d.num_heads = num_heads;
    d.frame_dim = frame_dim;
    d.audio_dim = kAudioFeatureDim;
    d.num_frames = num_frames;
    d.num_init_frames = num_init_frames;
    d.prediction_mode = prediction_mode;
    return d;
}

std::vector<TrainingWindow> window_dataset(const std::filesystem::path& dataset_dir,
                                           const NormalizationStats& stats, const TrainConfig& cfg,
                                           const std::function<void(const std::string&)>& warn) {
    cfg.validate();
    const auto clip_dirs = list_clip_dirs(dataset_dir);
    if (clip_dirs.empty()) throw std::runtime_error("window_dataset: no clips in " + dataset_dir.string());

    std::vector<TrainingWindow> windows;
    for (const auto& dir : clip_dirs) {
        const GestureClip clip = read_clip(dir);
        const int frames = clip.keypoints.length();
        if (frames < cfg.num_frames) {
            if (warn) {
                warn("skipping clip '" + clip.id + "': " + std::to_string(frames) +
                     " frames < window of " + std::to_string(cfg.num_frames));
            }
            continue;
        }
        const Eigen::MatrixXd all = normalize(sequence_to_matrix(clip.keypoints), stats);
        Waveform wav;
        wav.sample_rate = kAudioSampleRate;
        if (clip.audio.sample_rate > 0.0) {
            wav = to_mono_16k({clip.audio.samples}, clip.audio.sample_rate);
        } else {
            wav.samples.assign(static_cast<size_t>(frames / clip.keypoints.fps * kAudioSampleRate), 0.0);
        }
        const AudioFeatureSequence feats = extract_features(wav, frames);

        for (int start = 0; start + cfg.num_frames <= frames; start += cfg.stride) {
            TrainingWindow w;
            w.x0 = all.middleRows(start, cfg.num_frames);
            w.context.init_frames = w.x0.topRows(cfg.num_init_frames);
            w.context.audio = feats.features.middleRows(start, cfg.num_frames);
            w.context.is_null = false;
            windows.push_back(std::move(w));
        }
    }
    if (windows.empty()) throw std::runtime_error("window_dataset: no usable windows (all clips too short)");
    return windows;
}

namespace {

void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const TrainConfig& cfg,
                 AdamState& state) {
    if (state.m.size() != params.size()) {
        state.m = Eigen::VectorXd::Zero(params.size());
        state.v = Eigen::VectorXd::Zero(params.size());
        state.updates = 0;
    }
    state.updates += 1;
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad;
    state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.updates));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.updates));
    params.array() -= cfg.lr * (state.m.array() / bc1) /
                      ((state.v.array() / bc2).sqrt() + cfg.adam_eps);
}

struct SampleDraw {
    int t = 1;
    bool null_ctx = false;
    Eigen::MatrixXd eps;
};

}  // namespace

StepResult train_step(const Denoiser& model, Eigen::VectorXd& params,
                      const std::vector<const TrainingWindow*>& batch,
                      const DiffusionSchedule& sched, const TrainConfig& cfg, Rng& rng,
                      AdamState& adam) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const int b = static_cast<int>(batch.size());
    const int n = cfg.num_frames;
    const int f = static_cast<int>(batch.front()->x0.cols());

    // Draw all per-sample randomness up front so the result does not
    // depend on how the compute is scheduled across threads.
    std::vector<SampleDraw> draws(b);
    for (auto& d : draws) {
        d.t = static_cast<int>(rng.uniform_int(1, sched.timesteps));
        d.null_ctx = rng.bernoulli(cfg.p_uncond);
        d.eps.resize(n, f);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < f; ++c) d.eps(r, c) = rng.gaussian();
        }
    }

    std::vector<double> losses(b, 0.0);
    const int max_threads = std::min(max_worker_threads(), b);
    std::vector<Eigen::VectorXd> thread_grads(max_threads);

    parallel_blocks(
        b,
        [&](int first, int last, int thread_idx) {
            Eigen::VectorXd& grad = thread_grads[thread_idx];
            grad = Eigen::VectorXd::Zero(params.size());
            DenoiserTape tape;
            for (int i = first; i < last; ++i) {
                const TrainingWindow& w = *batch[i];
                const SampleDraw& d = draws[i];
                const ConditioningContext& ctx =
                    d.null_ctx ? ConditioningContext::null_context() : w.context;
                const Eigen::MatrixXd x_t = q_sample(w.x0, d.t, d.eps, sched);
                const Eigen::MatrixXd out = model.forward_tape(params, x_t, d.t, ctx, &tape);
                const Eigen::MatrixXd& target =
                    cfg.prediction_mode == PredictionMode::kNoise ? d.eps : w.x0;
                losses[i] = (out - target).squaredNorm() / static_cast<double>(target.size());
                const Eigen::MatrixXd d_out =
                    (2.0 / static_cast<double>(target.size())) * (out - target);
                model.backward(params, tape, d_out, grad);
            }
        },
        max_threads);

    // Deterministic reductions: losses in sample order, gradients in
    // thread-block order.
    double loss_sum = 0.0;
    for (double l : losses) loss_sum += l;
    const double loss = loss_sum / b;
    if (!std::isfinite(loss)) {
        throw std::runtime_error("train_step: non-finite loss (t draws, gradient blow-up?); "
                                 "first sample t=" + std::to_string(draws.front().t));
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    for (const auto& g : thread_grads) {
        if (g.size() == params.size()) grad += g;
    }
    grad /= static_cast<double>(b);

    if (cfg.grad_clip_norm > 0.0) {
        const double norm = grad.norm();
        if (norm > cfg.grad_clip_norm) grad *= cfg.grad_clip_norm / norm;
    }
    adam_update(params, grad, cfg, adam);

    StepResult res;
    res.loss = loss;
    res.batch = b;
    for (const auto& d : draws) res.null_count += d.null_ctx ? 1 : 0;
    return res;
}

Checkpoint train(const std::filesystem::path& dataset_dir, const TrainConfig& cfg,
                 const std::filesystem::path& out_dir, const TrainHooks& hooks,
                 const Checkpoint* resume_from) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const NormalizationStats stats = read_stats(dataset_dir / "stats.json");
    const std::vector<TrainingWindow> windows = window_dataset(dataset_dir, stats, cfg, hooks.warn);

    const int frame_dim = static_cast<int>(windows.front().x0.cols());
    const Denoiser model(cfg.denoiser_config(frame_dim));
    const DiffusionSchedule sched =
        make_schedule(cfg.schedule_timesteps, cfg.schedule_beta_1, cfg.schedule_beta_T);

    Checkpoint ckpt;
    ckpt.config = model.config();
    ckpt.schedule_timesteps = cfg.schedule_timesteps;
    ckpt.schedule_beta_1 = cfg.schedule_beta_1;
    ckpt.schedule_beta_T = cfg.schedule_beta_T;
    ckpt.stats = stats;
    ckpt.train_seed = cfg.seed;
    AdamState adam;
    std::int64_t start_step = 0;
    if (resume_from != nullptr) {
        if (resume_from->params.size() != model.layout().total) {
            throw std::invalid_argument("train: resume checkpoint does not match the model layout");
        }
        ckpt.params = resume_from->params;
        if (resume_from->optimizer) adam = *resume_from->optimizer;
        start_step = resume_from->step;
    } else {
        ckpt.params = model.init_params(splitmix64(cfg.seed));
    }

    // Epochs are shuffled deterministically from (seed, epoch); batches take
    // consecutive chunks and the remainder carries into no batch.
    const int num_windows = static_cast<int>(windows.size());
    const int batch = std::min<int>(cfg.batch_size, num_windows);
    const std::int64_t batches_per_epoch = std::max<std::int64_t>(1, num_windows / batch);

    std::ofstream metrics(out_dir / "metrics.ndjson", start_step > 0 ? std::ios::app : std::ios::out);
    std::vector<int> order(num_windows);
    std::int64_t shuffled_epoch = -1;

    std::int64_t null_total = 0;
    std::int64_t sample_total = 0;
    for (std::int64_t step = start_step; step < cfg.max_steps; ++step) {
        const std::int64_t epoch = step / batches_per_epoch;
        if (epoch != shuffled_epoch) {
            std::iota(order.begin(), order.end(), 0);
            Rng shuffle_rng = Rng::derive(cfg.seed, 0xe90c0000ULL + static_cast<std::uint64_t>(epoch));
            for (int i = num_windows - 1; i > 0; --i) {
                const int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
                std::swap(order[i], order[j]);
            }
            shuffled_epoch = epoch;
        }
        const std::int64_t batch_idx = step % batches_per_epoch;
        std::vector<const TrainingWindow*> items(batch);
        for (int i = 0; i < batch; ++i) {
            items[i] = &windows[order[batch_idx * batch + i]];
        }

        Rng step_rng = Rng::derive(cfg.seed, 0x57e90000ULL + static_cast<std::uint64_t>(step));
        const auto t0 = std::chrono::steady_clock::now();
        const StepResult res = train_step(model, ckpt.params, items, sched, cfg, step_rng, adam);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        null_total += res.null_count;
        sample_total += res.batch;
        const double null_fraction =
            sample_total > 0 ? static_cast<double>(null_total) / sample_total : 0.0;
        metrics << "{\"step\":" << (step + 1) << ",\"loss\":" << res.loss
                << ",\"null_fraction\":" << null_fraction << ",\"wall_ms\":" << wall_ms << "}\n";
        if (hooks.on_step) hooks.on_step(step + 1, res.loss, null_fraction, wall_ms);

        ckpt.step = step + 1;
        if (cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0 &&
            step + 1 < cfg.max_steps) {
            ckpt.optimizer = adam;
            char name[32];
            std::snprintf(name, sizeof(name), "checkpoint_%07lld.ckpt",
                          static_cast<long long>(step + 1));
            save_checkpoint(out_dir / name, ckpt);
        }
    }

    ckpt.step = cfg.max_steps;
    ckpt.optimizer = adam;
    save_checkpoint(out_dir / "checkpoint_final.ckpt", ckpt);
    metrics.flush();
    return ckpt;
}

}  // namespace gdiff
