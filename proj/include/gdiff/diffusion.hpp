// diffusion.hpp
// Denoising diffusion over keypoint sequences: linear variance schedule,
// closed-form forward noising, the two training objectives and the guided
// reverse sampler. Sequence tensors are N x 2K matrices (frames x channels).

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>

#include "gdiff/rng.hpp"

namespace gdiff {

struct DiffusionSchedule {
    Eigen::VectorXd betas;       // beta_t, t = 1..T stored at index t-1
    Eigen::VectorXd alphas;      // 1 - beta_t
    Eigen::VectorXd alpha_bars;  // prod_{s<=t} alpha_s
    int timesteps = 0;

    double beta(int t) const { return betas[t - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return alpha_bars[t - 1]; }
};

struct NoisySample {
    Eigen::MatrixXd x_t;
    int t = 0;
};

// c = (initial M keypoint frames, audio features), or the null context.
struct ConditioningContext {
    Eigen::MatrixXd init_frames;  // M x 2K, normalized
    Eigen::MatrixXd audio;        // N x 32
    bool is_null = false;

    static ConditioningContext null_context() {
        ConditioningContext c;
        c.is_null = true;
        return c;
    }
};

enum class PredictionMode { kNoise, kSample };

// Linearly spaced betas inclusive of both endpoints.
DiffusionSchedule make_schedule(int timesteps, double beta_1, double beta_T);

void write_schedule_json(const std::filesystem::path& path, const DiffusionSchedule& s,
                         double beta_1, double beta_T);
DiffusionSchedule read_schedule_json(const std::filesystem::path& path);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                         const DiffusionSchedule& sched);

// Mean squared error over all elements.
double noise_loss(const Eigen::MatrixXd& eps_hat, const Eigen::MatrixXd& eps);
double sample_loss(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& x0);

// eps_uncond + s * (eps_cond - eps_uncond); the endpoints s=0 and s=1
// return the respective input exactly.
Eigen::MatrixXd guided_noise(const Eigen::MatrixXd& eps_cond, const Eigen::MatrixXd& eps_uncond,
                             double s);

// x_{t-1} = (x_t - beta_t/sqrt(1-abar_t) eps_hat)/sqrt(alpha_t) + sqrt(beta_t) noise.
// No noise is injected at t = 1 regardless of the noise argument.
Eigen::MatrixXd p_sample_step(const Eigen::MatrixXd& x_t, int t, const Eigen::MatrixXd& eps_hat,
                              const DiffusionSchedule& sched, const Eigen::MatrixXd& noise);

// Model evaluated during sampling; returns eps_hat or x_hat depending on
// the prediction mode the model was trained with.
using DenoiseFn =
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x_t, int t, const ConditioningContext&)>;

struct SampleOptions {
    double guidance_s = 0.2;
    PredictionMode mode = PredictionMode::kNoise;
    bool clamp_x0 = false;     // off by default; clamp range below
    double clamp_limit = 5.0;  // in normalized units, only used when clamp_x0
};

// Full reverse pass from seeded Gaussian noise. The model is evaluated
// twice per step (conditional and unconditional) and the predictions are
// combined with classifier-free guidance. In sample-prediction mode the
// model output x_hat is converted to eps_hat before the update.
Eigen::MatrixXd sample(const DenoiseFn& model, const ConditioningContext& context, int num_frames,
                       int channels, const DiffusionSchedule& sched, const SampleOptions& opts,
                       std::uint64_t seed);

}  // namespace gdiff
