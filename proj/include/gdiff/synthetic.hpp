// synthetic.hpp
// Desk-scale stand-in corpus. Keypoints swing between reversal points whose
// times are the beats of a generated burst audio track; burst loudness
// modulates the swing amplitude. Audio therefore genuinely predicts both
// the timing and the size of the motion, and the generator's own beat grid
// serves as ground truth for the beat metrics.

#pragma once

#include <filesystem>
#include <vector>

#include "gdiff/core_types.hpp"

namespace gdiff {

struct SyntheticConfig {
    int num_clips = 8;
    int frames_per_clip = 128;
    int num_keypoints = 10;
    double fps = 25.0;
    double base_amplitude = 0.08;
    double min_beat_gap = 0.4;   // seconds
    double max_beat_gap = 0.8;
    double burst_decay = 0.05;   // exp decay constant of each tone burst
    double carrier_hz = 440.0;
};

struct SyntheticClipTruth {
    std::string id;
    std::vector<double> beat_times;  // inside [0, duration]
};

// Writes clips in the standard clip format plus stats.json for the whole
// dataset and a truth.json per clip with the ground-truth beat times.
std::vector<SyntheticClipTruth> make_synthetic_dataset(const std::filesystem::path& out_dir,
                                                       const SyntheticConfig& cfg,
                                                       std::uint64_t seed);

// In-memory variant of a single clip, used by tests and held-out evaluation.
GestureClip make_synthetic_clip(const SyntheticConfig& cfg, std::uint64_t seed,
                                SyntheticClipTruth* truth = nullptr);

}  // namespace gdiff
