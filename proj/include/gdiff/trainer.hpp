// trainer.hpp
// Dataset windowing and the joint conditional/unconditional training loop.
// Every random draw is derived from (seed, step), so a resumed run follows
// the same trajectory as an uninterrupted one.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gdiff/checkpoint.hpp"
#include "gdiff/core_types.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"

namespace gdiff {

struct TrainConfig {
    int num_frames = 34;       // N
    int num_init_frames = 4;   // M
    int stride = 10;
    double lr = 5e-4;
    double p_uncond = 0.1;
    int batch_size = 64;
    std::int64_t max_steps = 20000;
    std::uint64_t seed = 0;
    PredictionMode prediction_mode = PredictionMode::kNoise;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 1.0;
    std::int64_t checkpoint_interval = 1000;

    int schedule_timesteps = 500;
    double schedule_beta_1 = 1e-4;
    double schedule_beta_T = 0.02;

    int hidden_dim = 256;
    int num_blocks = 8;
    int num_heads = 8;

    void validate() const;
    DenoiserConfig denoiser_config(int frame_dim) const;
};

struct TrainingWindow {
    Eigen::MatrixXd x0;          // N x 2K, normalized
    ConditioningContext context; // init = x0 rows [0, M), plus aligned audio
};

// Cut every clip into windows at offsets 0, stride, 2*stride, ... Clips
// shorter than N frames are skipped with a warning through `warn`.
std::vector<TrainingWindow> window_dataset(
    const std::filesystem::path& dataset_dir, const NormalizationStats& stats,
    const TrainConfig& cfg,
    const std::function<void(const std::string&)>& warn = {});

struct StepResult {
    double loss = 0.0;
    int null_count = 0;  // batch entries trained with the null context
    int batch = 0;
};

// One optimizer update on a batch of windows. Per-sample randomness
// (timestep, noise, context nulling) comes from `rng`.
StepResult train_step(const Denoiser& model, Eigen::VectorXd& params,
                      const std::vector<const TrainingWindow*>& batch,
                      const DiffusionSchedule& sched, const TrainConfig& cfg, Rng& rng,
                      AdamState& adam);

struct TrainHooks {
    std::function<void(std::int64_t step, double loss, double null_fraction, double wall_ms)> on_step;
    std::function<void(const std::string&)> warn;
};

// Full training run. Writes periodic checkpoints and a final checkpoint
// under out_dir; returns the final checkpoint. Pass `resume_from` to
// continue a run (same dataset, config and seed).
Checkpoint train(const std::filesystem::path& dataset_dir, const TrainConfig& cfg,
                 const std::filesystem::path& out_dir, const TrainHooks& hooks = {},
                 const Checkpoint* resume_from = nullptr);

}  // namespace gdiff
