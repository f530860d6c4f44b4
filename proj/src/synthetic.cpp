#include "gdiff/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gdiff/audio_features.hpp"
#include "gdiff/clip_io.hpp"
#include "gdiff/rng.hpp"

namespace gdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

}  // namespace

GestureClip make_synthetic_clip(const SyntheticConfig& cfg, std::uint64_t seed,
                                SyntheticClipTruth* truth) {
    Rng rng(seed);
    const double duration = cfg.frames_per_clip / cfg.fps;

    // Beat grid: one phantom beat before the clip, then beats at random
    // gaps until the grid covers the whole duration.
    std::vector<double> grid;
    {
        double t = 0.1 + 0.2 * rng.uniform();
        const double phantom = t - (cfg.min_beat_gap +
                                    (cfg.max_beat_gap - cfg.min_beat_gap) * rng.uniform());
        grid.push_back(phantom);
        while (t < duration + cfg.max_beat_gap) {
            grid.push_back(t);
            t += cfg.min_beat_gap + (cfg.max_beat_gap - cfg.min_beat_gap) * rng.uniform();
        }
    }
    std::vector<double> loudness(grid.size());
    for (auto& l : loudness) l = 0.5 + 0.5 * rng.uniform();

    // Per-clip keypoint anchors and swing directions. Direction components
    // keep a minimum magnitude so no coordinate channel is degenerate.
    const int k = cfg.num_keypoints;
    Eigen::MatrixXd centers(k, 2);
    Eigen::MatrixXd dirs(k, 2);
    for (int i = 0; i < k; ++i) {
        centers(i, 0) = 0.35 + 0.3 * rng.uniform();
        centers(i, 1) = 0.35 + 0.3 * rng.uniform();
        const double ang = 2.0 * kPi * rng.uniform();
        for (int c = 0; c < 2; ++c) {
            const double v = c == 0 ? std::cos(ang) : std::sin(ang);
            dirs(i, c) = std::copysign(std::max(std::abs(v), 0.2), v);
        }
    }

    // Phase advances linearly by pi between consecutive beats, so every
    // beat is a motion reversal (a sharp speed minimum). Amplitude eases
    // between per-interval targets set by burst loudness.
    auto interval_of = [&](double t) {
        int n = 0;
        while (n + 2 < static_cast<int>(grid.size()) && grid[n + 1] <= t) ++n;
        return n;
    };
    GestureClip clip;
    clip.keypoints.fps = cfg.fps;
    clip.keypoints.frames.resize(cfg.frames_per_clip);
    for (int i = 0; i < cfg.frames_per_clip; ++i) {
        const double t = i / cfg.fps;
        const int n = interval_of(t);
        const double u = std::clamp((t - grid[n]) / (grid[n + 1] - grid[n]), 0.0, 1.0);
        const double theta = kPi / 2.0 + n * kPi + kPi * u;
        const double level0 = 0.4 + 0.6 * loudness[n];
        const double level1 = 0.4 + 0.6 * loudness[std::min<size_t>(n + 1, loudness.size() - 1)];
        const double amp = cfg.base_amplitude * (level0 + (level1 - level0) * smoothstep(u));
        const double g = std::sin(theta);
        Eigen::VectorXd coords(2 * k);
        for (int p = 0; p < k; ++p) {
            coords[2 * p] = centers(p, 0) + dirs(p, 0) * amp * g;
            coords[2 * p + 1] = centers(p, 1) + dirs(p, 1) * amp * g;
        }
        clip.keypoints.frames[i].coords = std::move(coords);
    }

    // Audio: one sharp-attack tone burst per beat (2 ms fade-in,
    // exponential decay), scaled by the beat's loudness.
    const auto num_samples = static_cast<size_t>(std::llround(duration * kAudioSampleRate));
    clip.audio.sample_rate = kAudioSampleRate;
    clip.audio.samples.assign(num_samples, 0.0);
    for (size_t bi = 0; bi < grid.size(); ++bi) {
        const double b = grid[bi];
        const auto start = static_cast<std::int64_t>(std::ceil(std::max(0.0, b) * kAudioSampleRate));
        for (std::int64_t s = start; s < static_cast<std::int64_t>(num_samples); ++s) {
            const double tau = s / kAudioSampleRate - b;
            if (tau < 0.0) continue;
            if (tau > 8.0 * cfg.burst_decay) break;
            const double attack = std::min(tau / 0.002, 1.0);
            clip.audio.samples[s] += 0.6 * loudness[bi] * attack * std::exp(-tau / cfg.burst_decay) *
                                     std::sin(2.0 * kPi * cfg.carrier_hz * tau);
        }
    }

    if (truth != nullptr) {
        truth->beat_times.clear();
        for (size_t bi = 1; bi < grid.size(); ++bi) {
            if (grid[bi] >= 0.0 && grid[bi] <= duration) truth->beat_times.push_back(grid[bi]);
        }
    }
    return clip;
}

std::vector<SyntheticClipTruth> make_synthetic_dataset(const std::filesystem::path& out_dir,
                                                       const SyntheticConfig& cfg,
                                                       std::uint64_t seed) {
    if (cfg.num_clips <= 0 || cfg.frames_per_clip <= 0 || cfg.num_keypoints <= 0) {
        throw std::invalid_argument("make_synthetic_dataset: sizes must be positive");
    }
    std::filesystem::create_directories(out_dir);
    std::vector<SyntheticClipTruth> truths;
    std::vector<KeypointSequence> sequences;
    for (int i = 0; i < cfg.num_clips; ++i) {
        SyntheticClipTruth truth;
        char id[32];
        std::snprintf(id, sizeof(id), "clip_%04d", i);
        truth.id = id;
        GestureClip clip = make_synthetic_clip(cfg, splitmix64(seed) + i, &truth);
        clip.id = id;
        const auto dir = out_dir / id;
        write_clip(dir, clip);
        nlohmann::json tj{{"beat_times", truth.beat_times}};
        std::ofstream tf(dir / "truth.json");
        tf << tj.dump(2) << "\n";
        sequences.push_back(clip.keypoints);
        truths.push_back(std::move(truth));
    }
    write_stats(out_dir / "stats.json", compute_stats(sequences));
    return truths;
}

}  // namespace gdiff
