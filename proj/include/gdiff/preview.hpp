// preview.hpp
// Deterministic pure-TPS preview of a driving keypoint sequence. Lower
// fidelity than the external neural renderer (one global TPS, no dense
// motion or inpainting); each output frame is the source image warped by
// the spline from the driving keypoints back to the source keypoints.

#pragma once

#include <filesystem>
#include <functional>

#include "gdiff/core_types.hpp"
#include "gdiff/image.hpp"

namespace gdiff {

struct PreviewOptions {
    double lambda = 1e-3;  // TPS smoothing; guards near-degenerate frames
    bool overlay_keypoints = true;
};

struct PreviewResult {
    int frames_written = 0;
    int frames_skipped = 0;
};

// Writes frame_%05d.png per driving frame plus preview_meta.json. Frames
// whose TPS solve fails are skipped with a warning.
PreviewResult preview_sequence(const ImageGrid& source_img, const KeypointFrame& source_kp,
                               const KeypointSequence& driving,
                               const std::filesystem::path& out_dir,
                               const PreviewOptions& opts = {},
                               const std::function<void(const std::string&)>& warn = {});

}  // namespace gdiff
