#include "gdiff/generator.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gdiff/audio_features.hpp"
#include "gdiff/denoiser.hpp"

namespace gdiff {

Eigen::MatrixXd generate_clip(const DenoiseFn& model, const DenoiserConfig& cfg,
                              const DiffusionSchedule& sched, const Eigen::MatrixXd& audio_feats,
                              const Eigen::MatrixXd& init_frames, double guidance_s,
                              std::uint64_t seed) {
    ConditioningContext ctx;
    ctx.init_frames = init_frames;
    ctx.audio = audio_feats;
    ctx.is_null = false;
    SampleOptions opts;
    opts.guidance_s = guidance_s;
    opts.mode = cfg.prediction_mode;
    return sample(model, ctx, cfg.num_frames, cfg.frame_dim, sched, opts, seed);
}

Eigen::MatrixXd interpolate_overlap(const Eigen::MatrixXd& prev_tail,
                                    const Eigen::MatrixXd& next_head) {
    if (prev_tail.rows() != next_head.rows() || prev_tail.cols() != next_head.cols()) {
        throw std::invalid_argument("interpolate_overlap: segment shapes differ");
    }
    const int m = static_cast<int>(prev_tail.rows());
    Eigen::MatrixXd out(m, prev_tail.cols());
    for (int i = 0; i < m; ++i) {
        const double w_prev = static_cast<double>(m - i) / (m + 1);
        const double w_next = static_cast<double>(i + 1) / (m + 1);
        out.row(i) = w_prev * prev_tail.row(i) + w_next * next_head.row(i);
    }
    return out;
}

GeneratedSequence generate_long(const Checkpoint& ckpt, const GenerationRequest& request) {
    const DenoiserConfig& cfg = ckpt.config;
    const int n = cfg.num_frames;
    const int m = cfg.num_init_frames;
    const double fps = kDefaultFps;

    if (request.source_keypoints.coords.size() != cfg.frame_dim) {
        throw std::invalid_argument("generate_long: source keypoints have " +
                                    std::to_string(request.source_keypoints.coords.size() / 2) +
                                    " keypoints, model expects " + std::to_string(cfg.frame_dim / 2));
    }
    const Waveform wav = request.audio.sample_rate == kAudioSampleRate
                             ? request.audio
                             : to_mono_16k({request.audio.samples}, request.audio.sample_rate);
    const int total_frames = static_cast<int>(std::floor(wav.duration_seconds() * fps + 0.5));
    if (total_frames < n) {
        throw std::invalid_argument("generate_long: audio too short (" +
                                    std::to_string(wav.duration_seconds()) + " s); need at least " +
                                    std::to_string(n / fps) + " s");
    }

    // Segment starts: fixed hop of N - M, with the last segment aligned to
    // end at the final frame (possibly overlapping its predecessor by more
    // than M).
    std::vector<int> starts;
    for (int s = 0; s + n <= total_frames; s += n - m) starts.push_back(s);
    if (starts.back() + n < total_frames) starts.push_back(total_frames - n);

    const AudioFeatureSequence feats = extract_features(wav, total_frames);

    const Denoiser model(cfg);
    const DenoiseFn fn = model.bind(ckpt.params);
    const DiffusionSchedule sched = ckpt.schedule();

    // Normalized source frame repeated M times anchors the first segment.
    const Eigen::MatrixXd source_row = request.source_keypoints.coords.transpose();
    const Eigen::MatrixXd source_init = normalize(source_row, ckpt.stats).replicate(m, 1);

    Eigen::MatrixXd output(total_frames, cfg.frame_dim);
    int covered = 0;  // frames [0, covered) are committed
    for (size_t si = 0; si < starts.size(); ++si) {
        const int start = starts[si];
        // Subsequent segments condition on the already-generated frames at
        // their first M positions (the previous segment's tail).
        const Eigen::MatrixXd init = si == 0 ? source_init : output.middleRows(start, m);
        const Eigen::MatrixXd seg_audio = feats.features.middleRows(start, n);
        const Eigen::MatrixXd seg = generate_clip(fn, cfg, sched, seg_audio, init, request.guidance_s,
                                                  splitmix64(request.seed) + si);
        if (si == 0) {
            output.topRows(n) = seg;
            covered = n;
        } else {
            const int overlap = covered - start;
            output.middleRows(start, overlap) =
                interpolate_overlap(output.middleRows(start, overlap), seg.topRows(overlap));
            output.middleRows(covered, n - overlap) = seg.bottomRows(n - overlap);
            covered = start + n;
        }
    }

    GeneratedSequence result;
    result.keypoints = matrix_to_sequence(denormalize(output, ckpt.stats), fps);
    result.timestamps.resize(total_frames);
    for (int i = 0; i < total_frames; ++i) result.timestamps[i] = i / fps;
    return result;
}

void write_driving_json(const std::filesystem::path& path, const KeypointSequence& seq) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : seq.frames) {
        nlohmann::json fr = nlohmann::json::array();
        for (int k = 0; k < f.num_keypoints(); ++k) {
            fr.push_back({f.x(k), f.y(k)});
        }
        frames.push_back(std::move(fr));
    }
    nlohmann::json j{{"fps", seq.fps}, {"K", seq.num_keypoints()}, {"frames", std::move(frames)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << "\n";
}

KeypointSequence read_driving_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    KeypointSequence seq;
    seq.fps = j.at("fps").get<double>();
    const int k = j.at("K").get<int>();
    for (const auto& fr : j.at("frames")) {
        KeypointFrame frame;
        frame.coords.resize(2 * k);
        if (static_cast<int>(fr.size()) != k) {
            throw std::runtime_error("driving.json: frame with wrong keypoint count");
        }
        for (int i = 0; i < k; ++i) {
            frame.coords[2 * i] = fr[i][0].get<double>();
            frame.coords[2 * i + 1] = fr[i][1].get<double>();
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

}  // namespace gdiff
