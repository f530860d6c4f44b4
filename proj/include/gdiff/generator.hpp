// generator.hpp
// One-shot clip generation and long-form assembly. Long sequences are
// stitched from N-frame segments that overlap by M frames; each segment is
// conditioned on the previous segment's tail and the shared frames are
// linearly blended.

#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "gdiff/checkpoint.hpp"
#include "gdiff/core_types.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/waveform.hpp"

namespace gdiff {

struct GenerationRequest {
    KeypointFrame source_keypoints;  // raw (unnormalized) coordinates
    Waveform audio;                  // 16 kHz mono (see load_wav)
    double guidance_s = 0.2;
    std::uint64_t seed = 0;
};

struct GeneratedSequence {
    KeypointSequence keypoints;       // denormalized
    std::vector<double> timestamps;   // seconds, one per frame
};

// Single N-frame segment, normalized in/out. Delegates to the sampler.
Eigen::MatrixXd generate_clip(const DenoiseFn& model, const DenoiserConfig& cfg,
                              const DiffusionSchedule& sched, const Eigen::MatrixXd& audio_feats,
                              const Eigen::MatrixXd& init_frames, double guidance_s,
                              std::uint64_t seed);

// Blend of the M shared frames: frame i gets weight (M-i)/(M+1) from the
// previous segment and (i+1)/(M+1) from the next.
Eigen::MatrixXd interpolate_overlap(const Eigen::MatrixXd& prev_tail,
                                    const Eigen::MatrixXd& next_head);

// Full pipeline: segment the audio, generate, stitch, denormalize.
GeneratedSequence generate_long(const Checkpoint& ckpt, const GenerationRequest& request);

// driving.json: {fps, K, frames: [[[x, y] * K] * N]} - the export contract
// consumed by the external renderer and the preview module.
void write_driving_json(const std::filesystem::path& path, const KeypointSequence& seq);
KeypointSequence read_driving_json(const std::filesystem::path& path);

}  // namespace gdiff
