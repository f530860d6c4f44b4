#include "gdiff/preview.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gdiff/threading.hpp"

namespace gdiff {

namespace {

Eigen::MatrixXd frame_points(const KeypointFrame& f) {
    Eigen::MatrixXd pts(f.num_keypoints(), 2);
    for (int k = 0; k < f.num_keypoints(); ++k) {
        pts(k, 0) = f.x(k);
        pts(k, 1) = f.y(k);
    }
    return pts;
}

}  // namespace

PreviewResult preview_sequence(const ImageGrid& source_img, const KeypointFrame& source_kp,
                               const KeypointSequence& driving,
                               const std::filesystem::path& out_dir, const PreviewOptions& opts,
                               const std::function<void(const std::string&)>& warn) {
    if (driving.num_keypoints() != source_kp.num_keypoints()) {
        throw std::invalid_argument("preview_sequence: driving K (" +
                                    std::to_string(driving.num_keypoints()) +
                                    ") differs from source K (" +
                                    std::to_string(source_kp.num_keypoints()) + ")");
    }
    std::filesystem::create_directories(out_dir);
    const Eigen::MatrixXd source_pts = frame_points(source_kp);

    const int n = driving.length();
    std::vector<int> ok(n, 0);
    std::vector<std::string> errors(n);
    parallel_blocks(n, [&](int first, int last, int) {
        for (int i = first; i < last; ++i) {
            try {
                // Backward map: output (driving-pose) coordinates -> source.
                const TpsTransform t =
                    solve_tps(frame_points(driving.frames[i]), source_pts, opts.lambda);
                ImageGrid frame = warp_image(source_img, t);
                if (opts.overlay_keypoints) {
                    frame = render_overlay(driving.frames[i], frame, warn);
                }
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%05d.png", i);
                png_write(out_dir / name, frame);
                ok[i] = 1;
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    });

    PreviewResult res;
    for (int i = 0; i < n; ++i) {
        if (ok[i]) {
            ++res.frames_written;
        } else {
            ++res.frames_skipped;
            if (warn) warn("frame " + std::to_string(i) + " skipped: " + errors[i]);
        }
    }

    nlohmann::json meta{{"fidelity", "tps-preview"},
                        {"lambda", opts.lambda},
                        {"K", source_kp.num_keypoints()},
                        {"frames_written", res.frames_written},
                        {"frames_skipped", res.frames_skipped}};
    std::ofstream out(out_dir / "preview_meta.json");
    out << meta.dump(2) << "\n";
    return res;
}

}  // namespace gdiff
