// clip_io.hpp
// On-disk clip format: one directory per clip with manifest.json,
// keypoints.bin (little-endian float32, row-major [frame][keypoint][x,y])
// and audio.wav. A dataset is a directory of clip directories plus
// stats.json {mean:[2K], std:[2K]}.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gdiff/core_types.hpp"

namespace gdiff {

struct ClipManifest {
    std::string id;
    double fps = kDefaultFps;
    int num_frames = 0;
    int num_keypoints = 0;
    // Present when a features.bin cache was written for this clip.
    std::optional<std::string> audio_content_hash;
};

void write_clip(const std::filesystem::path& dir, const GestureClip& clip);
GestureClip read_clip(const std::filesystem::path& dir);
ClipManifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const ClipManifest& m);

void write_stats(const std::filesystem::path& path, const NormalizationStats& stats);
NormalizationStats read_stats(const std::filesystem::path& path);

// Sorted list of subdirectories that contain a manifest.json.
std::vector<std::filesystem::path> list_clip_dirs(const std::filesystem::path& dataset_dir);

// Raw keypoint tensor I/O (count values = frames * K * 2).
void write_keypoints_bin(const std::filesystem::path& path, const Eigen::MatrixXd& frames_by_channels);
Eigen::MatrixXd read_keypoints_bin(const std::filesystem::path& path, int num_frames, int num_keypoints);

// PCM WAV. Reading accepts integer PCM (8/16/24/32 bit) and IEEE float
// (32/64 bit), any channel count and rate; channels are kept separate here.
// Writing emits 16-bit mono PCM.
struct RawWav {
    std::vector<std::vector<double>> channels;
    double sample_rate = 0.0;
};
RawWav wav_read(const std::filesystem::path& path);
void wav_write(const std::filesystem::path& path, const Waveform& mono);

// FNV-1a content hash of a file, hex encoded. Keys the features.bin cache.
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace gdiff
