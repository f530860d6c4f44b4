// metrics.hpp
// Gesture-level evaluation: Diversity via a small keypoint autoencoder and
// Beat Consistency from motion/audio beat alignment, plus the frame-export
// manifest hook for external perceptual-metric tooling.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <vector>

#include "gdiff/audio_features.hpp"
#include "gdiff/core_types.hpp"

namespace gdiff {

struct AutoencoderConfig {
    int latent_dim = 32;
    int window = 34;      // N frames
    int hidden_dim = 64;  // per-frame feature width
    int train_steps = 2000;
    int batch_size = 32;
    double lr = 1e-3;
    double holdout_fraction = 0.1;
};

// Encoder: per-frame linear to hidden, temporal mean-pool, linear to
// latent. Decoder mirrors it with a learned per-frame temporal embedding.
class KeypointAutoencoder {
public:
    KeypointAutoencoder(const AutoencoderConfig& cfg, int frame_dim);

    Eigen::VectorXd encode(const Eigen::MatrixXd& window) const;  // N x 2K -> latent
    Eigen::MatrixXd decode(const Eigen::VectorXd& latent) const;
    double reconstruction_mse(const std::vector<Eigen::MatrixXd>& windows) const;

    const AutoencoderConfig& config() const { return cfg_; }
    int frame_dim() const { return frame_dim_; }

    // Deterministic seeded training; returns the trace of per-step losses.
    std::vector<double> train(const std::vector<Eigen::MatrixXd>& windows, std::uint64_t seed);

    void save(const std::filesystem::path& path) const;
    static KeypointAutoencoder load(const std::filesystem::path& path);

private:
    friend struct AeGradCheck;
    AutoencoderConfig cfg_;
    int frame_dim_ = 0;
    // enc1: 2K x hidden, enc2: hidden x latent, dec1: latent x hidden,
    // temporal: N x hidden, dec2: hidden x 2K (+ bias rows)
    Eigen::MatrixXd enc1_w, enc2_w, dec1_w, dec2_w, temporal_;
    Eigen::RowVectorXd enc1_b, enc2_b, dec1_b, dec2_b;
};

// Trains on normalized windows; reports held-out reconstruction MSE via
// `holdout_mse` when non-null.
KeypointAutoencoder train_autoencoder(const std::vector<Eigen::MatrixXd>& windows,
                                      const AutoencoderConfig& cfg, std::uint64_t seed,
                                      double* holdout_mse = nullptr);

// Mean encoder-feature distance over generated x ground-truth cross pairs;
// pairs are capped (seeded subsample) for large sets.
using EncodeFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
double diversity(const std::vector<Eigen::MatrixXd>& gen_windows,
                 const std::vector<Eigen::MatrixXd>& gt_windows, const EncodeFn& encode,
                 std::int64_t max_pairs = 10000, std::uint64_t pair_seed = 0);
double diversity(const std::vector<Eigen::MatrixXd>& gen_windows,
                 const std::vector<Eigen::MatrixXd>& gt_windows,
                 const KeypointAutoencoder& encoder, std::int64_t max_pairs = 10000,
                 std::uint64_t pair_seed = 0);

struct MotionBeatConfig {
    double median_fraction = 0.8;  // speed threshold relative to the median
    double min_gap_seconds = 0.1;
};

// Kinematic pauses: local minima of the mean keypoint speed that fall
// below a fraction of the sequence's median speed.
BeatList detect_motion_beats(const KeypointSequence& seq, const MotionBeatConfig& cfg = {});

struct BeatAlignment {
    BeatList motion_beats;
    BeatList audio_beats;
    double sigma_bc = 0.1;  // seconds
};

// BC = mean over audio beats of exp(-d^2 / (2 sigma^2)), d the distance to
// the nearest motion beat; 0 when there are no motion beats.
double beat_consistency(const BeatAlignment& alignment);

// Ordered manifest of rendered frames with 1/fps-spaced timestamps, for
// downstream perceptual-metric tools. Returns the manifest path.
std::filesystem::path export_frames_manifest(const std::filesystem::path& frames_dir,
                                             double fps = kDefaultFps,
                                             const std::function<void(const std::string&)>& warn = {});

}  // namespace gdiff
