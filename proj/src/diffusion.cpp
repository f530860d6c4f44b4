#include "gdiff/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gdiff {

DiffusionSchedule make_schedule(int timesteps, double beta_1, double beta_T) {
    if (timesteps < 2) throw std::invalid_argument("make_schedule: need at least 2 timesteps");
    if (!(beta_1 > 0.0) || !(beta_1 <= beta_T) || !(beta_T < 1.0)) {
        throw std::invalid_argument("make_schedule: require 0 < beta_1 <= beta_T < 1");
    }
    DiffusionSchedule s;
    s.timesteps = timesteps;
    s.betas.resize(timesteps);
    s.alphas.resize(timesteps);
    s.alpha_bars.resize(timesteps);
    double running = 1.0;
    for (int i = 0; i < timesteps; ++i) {
        s.betas[i] = beta_1 + (beta_T - beta_1) * i / (timesteps - 1);
        s.alphas[i] = 1.0 - s.betas[i];
        running *= s.alphas[i];
        s.alpha_bars[i] = running;
    }
    return s;
}

void write_schedule_json(const std::filesystem::path& path, const DiffusionSchedule& s,
                         double beta_1, double beta_T) {
    nlohmann::json j{{"T", s.timesteps}, {"beta_1", beta_1}, {"beta_T", beta_T}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

DiffusionSchedule read_schedule_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return make_schedule(j.at("T").get<int>(), j.at("beta_1").get<double>(),
                         j.at("beta_T").get<double>());
}

namespace {

void check_t(int t, const DiffusionSchedule& sched, const char* op) {
    if (t < 1 || t > sched.timesteps) {
        throw std::invalid_argument(std::string(op) + ": timestep " + std::to_string(t) +
                                    " outside [1, " + std::to_string(sched.timesteps) + "]");
    }
}

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Eigen::MatrixXd q_sample(const Eigen::MatrixXd& x0, int t, const Eigen::MatrixXd& eps,
                         const DiffusionSchedule& sched) {
    check_t(t, sched, "q_sample");
    check_same_shape(x0, eps, "q_sample");
    const double abar = sched.alpha_bar(t);
    return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

double noise_loss(const Eigen::MatrixXd& eps_hat, const Eigen::MatrixXd& eps) {
    check_same_shape(eps_hat, eps, "noise_loss");
    return (eps_hat - eps).squaredNorm() / static_cast<double>(eps.size());
}

double sample_loss(const Eigen::MatrixXd& x_hat, const Eigen::MatrixXd& x0) {
    check_same_shape(x_hat, x0, "sample_loss");
    return (x_hat - x0).squaredNorm() / static_cast<double>(x0.size());
}

Eigen::MatrixXd guided_noise(const Eigen::MatrixXd& eps_cond, const Eigen::MatrixXd& eps_uncond,
                             double s) {
    check_same_shape(eps_cond, eps_uncond, "guided_noise");
    if (s == 0.0) return eps_uncond;
    if (s == 1.0) return eps_cond;
    return eps_uncond + s * (eps_cond - eps_uncond);
}

Eigen::MatrixXd p_sample_step(const Eigen::MatrixXd& x_t, int t, const Eigen::MatrixXd& eps_hat,
                              const DiffusionSchedule& sched, const Eigen::MatrixXd& noise) {
    check_t(t, sched, "p_sample_step");
    check_same_shape(x_t, eps_hat, "p_sample_step");
    const double beta = sched.beta(t);
    const double alpha = sched.alpha(t);
    const double abar = sched.alpha_bar(t);
    Eigen::MatrixXd mean =
        (x_t - (beta / std::sqrt(1.0 - abar)) * eps_hat) / std::sqrt(alpha);
    if (t == 1) return mean;
    check_same_shape(x_t, noise, "p_sample_step");
    return mean + std::sqrt(beta) * noise;
}

Eigen::MatrixXd sample(const DenoiseFn& model, const ConditioningContext& context, int num_frames,
                       int channels, const DiffusionSchedule& sched, const SampleOptions& opts,
                       std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(num_frames, channels);
    for (int r = 0; r < num_frames; ++r) {
        for (int c = 0; c < channels; ++c) x(r, c) = rng.gaussian();
    }

    const ConditioningContext null_ctx = ConditioningContext::null_context();
    for (int t = sched.timesteps; t >= 1; --t) {
        Eigen::MatrixXd pred_cond = model(x, t, context);
        Eigen::MatrixXd pred_uncond = model(x, t, null_ctx);
        if (opts.mode == PredictionMode::kSample) {
            // x_hat -> eps_hat via the q_sample identity.
            const double abar = sched.alpha_bar(t);
            const double root_abar = std::sqrt(abar);
            const double root_one_minus = std::sqrt(1.0 - abar);
            if (opts.clamp_x0) {
                pred_cond = pred_cond.cwiseMax(-opts.clamp_limit).cwiseMin(opts.clamp_limit);
                pred_uncond = pred_uncond.cwiseMax(-opts.clamp_limit).cwiseMin(opts.clamp_limit);
            }
            pred_cond = (x - root_abar * pred_cond) / root_one_minus;
            pred_uncond = (x - root_abar * pred_uncond) / root_one_minus;
        }
        const Eigen::MatrixXd eps_hat = guided_noise(pred_cond, pred_uncond, opts.guidance_s);

        Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(num_frames, channels);
        if (t > 1) {
            for (int r = 0; r < num_frames; ++r) {
                for (int c = 0; c < channels; ++c) noise(r, c) = rng.gaussian();
            }
        }
        x = p_sample_step(x, t, eps_hat, sched, noise);
    }
    return x;
}

}  // namespace gdiff
