// checkpoint.hpp
// Self-describing model container: JSON header (format version, denoiser
// config, schedule, normalization stats, tensor table) followed by raw
// little-endian float64 tensor data. Training checkpoints additionally
// carry the optimizer moments and step counter so runs can resume.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>

#include "gdiff/core_types.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"

namespace gdiff {

constexpr int kCheckpointFormatVersion = 1;

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t updates = 0;  // number of Adam updates applied
};

struct Checkpoint {
    DenoiserConfig config;
    int schedule_timesteps = 500;
    double schedule_beta_1 = 1e-4;
    double schedule_beta_T = 0.02;
    NormalizationStats stats;
    Eigen::VectorXd params;
    std::optional<AdamState> optimizer;
    std::int64_t step = 0;
    std::uint64_t train_seed = 0;

    DiffusionSchedule schedule() const {
        return make_schedule(schedule_timesteps, schedule_beta_1, schedule_beta_T);
    }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gdiff
