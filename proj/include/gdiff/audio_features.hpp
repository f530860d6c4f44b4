// audio_features.hpp
// Waveform ingestion, frame-aligned 32-D log-mel features and onset-based
// audio beat detection. Everything here is deterministic and model-free;
// the denoiser applies its own learned projection on top of these features.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "gdiff/waveform.hpp"

namespace gdiff {

constexpr double kAudioSampleRate = 16000.0;
constexpr int kAudioFeatureDim = 32;

struct AudioFeatureSequence {
    // num_frames x 32, one row per video frame at `fps`.
    Eigen::MatrixXd features;
    double fps = 25.0;
};

// Strictly increasing beat times in seconds.
struct BeatList {
    std::vector<double> times;
};

struct FeatureConfig {
    double fps = 25.0;
    int window_samples = 1024;  // 64 ms at 16 kHz, one analysis window per frame
    double log_floor = 1e-10;
};

struct BeatDetectConfig {
    int window_samples = 400;  // 25 ms
    int hop_samples = 160;     // 10 ms
    int fft_size = 512;
    double peak_delta = 1.0;   // threshold = mean + delta * std of the flux envelope
    double min_gap_seconds = 0.1;
    double log_floor = 1e-10;
};

// Read a PCM WAV, average channels to mono and resample to 16 kHz by
// linear interpolation. The identity path (already 16 kHz) copies samples.
Waveform load_wav(const std::filesystem::path& path);

Waveform to_mono_16k(const std::vector<std::vector<double>>& channels, double sample_rate);

// One 32-bin log-mel energy vector per frame; window i is centered at
// (i + 0.5) / fps seconds, zero-padded beyond the waveform edges.
AudioFeatureSequence extract_features(const Waveform& w, int num_frames,
                                      const FeatureConfig& cfg = {});

// Onset-strength envelope (positive spectral flux of the log-mel
// spectrogram) peak-picked above mean + delta * std with a minimum gap.
BeatList detect_audio_beats(const Waveform& w, const BeatDetectConfig& cfg = {});

// Triangular mel filterbank over [0, sample_rate/2]; rows are mel bins,
// columns FFT bins (fft_size/2 + 1). Exposed for tests.
Eigen::MatrixXd mel_filterbank(int num_mel, int fft_size, double sample_rate);

// features.bin cache (little-endian float32 row-major N x 32) next to a
// clip's audio, keyed by the audio file's content hash in manifest.json.
void write_feature_cache(const std::filesystem::path& clip_dir, const AudioFeatureSequence& feats);
bool read_feature_cache(const std::filesystem::path& clip_dir, int expected_frames,
                        AudioFeatureSequence* out);

}  // namespace gdiff
