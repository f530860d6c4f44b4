// core_types.hpp
// Keypoint clip domain types and the global normalization used before
// the sequences enter the diffusion model.

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gdiff/waveform.hpp"

namespace gdiff {

constexpr double kDefaultFps = 25.0;
constexpr int kDefaultNumKeypoints = 50;
// Floor applied to per-channel standard deviations so normalization never
// divides by (near) zero on degenerate channels.
constexpr double kStdFloor = 1e-6;

// One frame of K 2-D keypoints in normalized image coordinates.
struct KeypointFrame {
    // Flat [x0, y0, x1, y1, ...] of length 2K.
    Eigen::VectorXd coords;

    int num_keypoints() const { return static_cast<int>(coords.size() / 2); }
    double x(int k) const { return coords[2 * k]; }
    double y(int k) const { return coords[2 * k + 1]; }
};

struct KeypointSequence {
    std::vector<KeypointFrame> frames;
    double fps = kDefaultFps;

    int length() const { return static_cast<int>(frames.size()); }
    int num_keypoints() const { return frames.empty() ? 0 : frames.front().num_keypoints(); }
};

// Per-coordinate-channel mean and standard deviation (length 2K each).
struct NormalizationStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    int channels() const { return static_cast<int>(mean.size()); }
};

struct GestureClip {
    KeypointSequence keypoints;
    Waveform audio;
    std::string id;
};

struct ClipViolation {
    std::string field;
    int frame_index = -1;  // -1 when not frame specific
    std::string message;
};

// Dense matrix view of a sequence: rows are frames, columns the 2K channels.
Eigen::MatrixXd sequence_to_matrix(const KeypointSequence& seq);
KeypointSequence matrix_to_sequence(const Eigen::MatrixXd& mat, double fps = kDefaultFps);

// Population mean/std per coordinate channel over every frame of every clip.
// Stddevs below kStdFloor are clamped to kStdFloor.
NormalizationStats compute_stats(const std::vector<KeypointSequence>& dataset);

// x <- (x - mean) / std, per channel.
KeypointSequence normalize(const KeypointSequence& seq, const NormalizationStats& stats);
KeypointSequence denormalize(const KeypointSequence& seq, const NormalizationStats& stats);
Eigen::MatrixXd normalize(const Eigen::MatrixXd& seq, const NormalizationStats& stats);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& seq, const NormalizationStats& stats);

// Invariant report; never throws. Checks keypoint-count consistency, finite
// coordinates and audio/keypoint duration agreement (one frame of slack).
std::vector<ClipViolation> validate_clip(const GestureClip& clip);

}  // namespace gdiff
