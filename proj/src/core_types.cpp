#include "gdiff/core_types.hpp"

#include <cmath>
#include <stdexcept>

namespace gdiff {

Eigen::MatrixXd sequence_to_matrix(const KeypointSequence& seq) {
    if (seq.frames.empty()) return Eigen::MatrixXd(0, 0);
    const int n = seq.length();
    const int ch = static_cast<int>(seq.frames.front().coords.size());
    Eigen::MatrixXd mat(n, ch);
    for (int i = 0; i < n; ++i) {
        if (seq.frames[i].coords.size() != ch) {
            throw std::invalid_argument("sequence_to_matrix: inconsistent keypoint count at frame " +
                                        std::to_string(i));
        }
        mat.row(i) = seq.frames[i].coords.transpose();
    }
    return mat;
}

KeypointSequence matrix_to_sequence(const Eigen::MatrixXd& mat, double fps) {
    KeypointSequence seq;
    seq.fps = fps;
    seq.frames.resize(mat.rows());
    for (int i = 0; i < mat.rows(); ++i) {
        seq.frames[i].coords = mat.row(i).transpose();
    }
    return seq;
}

NormalizationStats compute_stats(const std::vector<KeypointSequence>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("compute_stats: empty dataset");
    const int ch = static_cast<int>(dataset.front().frames.empty()
                                        ? 0
                                        : dataset.front().frames.front().coords.size());
    if (ch == 0) throw std::invalid_argument("compute_stats: first clip has no frames");

    // Two-pass: exact mean first, then centered second moments.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(ch);
    std::int64_t count = 0;
    for (const auto& seq : dataset) {
        for (const auto& f : seq.frames) {
            if (f.coords.size() != ch) {
                throw std::invalid_argument("compute_stats: clips disagree on keypoint count");
            }
            sum += f.coords;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("compute_stats: dataset has no frames");
    const Eigen::VectorXd mean = sum / static_cast<double>(count);

    Eigen::VectorXd sq = Eigen::VectorXd::Zero(ch);
    for (const auto& seq : dataset) {
        for (const auto& f : seq.frames) {
            const Eigen::VectorXd d = f.coords - mean;
            sq += d.cwiseProduct(d);
        }
    }
    NormalizationStats stats;
    stats.mean = mean;
    stats.stddev = (sq / static_cast<double>(count)).cwiseSqrt().cwiseMax(kStdFloor);
    return stats;
}

namespace {

void check_channels(int seq_ch, const NormalizationStats& stats, const char* op) {
    if (seq_ch != stats.channels()) {
        throw std::invalid_argument(std::string(op) + ": keypoint count mismatch (sequence " +
                                    std::to_string(seq_ch / 2) + " vs stats " +
                                    std::to_string(stats.channels() / 2) + ")");
    }
}

}  // namespace

Eigen::MatrixXd normalize(const Eigen::MatrixXd& seq, const NormalizationStats& stats) {
    check_channels(static_cast<int>(seq.cols()), stats, "normalize");
    return (seq.rowwise() - stats.mean.transpose()).array().rowwise() /
           stats.stddev.transpose().array();
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& seq, const NormalizationStats& stats) {
    check_channels(static_cast<int>(seq.cols()), stats, "denormalize");
    return (seq.array().rowwise() * stats.stddev.transpose().array()).matrix().rowwise() +
           stats.mean.transpose();
}

KeypointSequence normalize(const KeypointSequence& seq, const NormalizationStats& stats) {
    return matrix_to_sequence(normalize(sequence_to_matrix(seq), stats), seq.fps);
}

KeypointSequence denormalize(const KeypointSequence& seq, const NormalizationStats& stats) {
    return matrix_to_sequence(denormalize(sequence_to_matrix(seq), stats), seq.fps);
}

std::vector<ClipViolation> validate_clip(const GestureClip& clip) {
    std::vector<ClipViolation> out;
    const auto& frames = clip.keypoints.frames;
    if (frames.empty()) {
        out.push_back({"keypoints", -1, "sequence is empty"});
        return out;
    }
    const int k = frames.front().num_keypoints();
    for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
        const auto& f = frames[i];
        if (f.num_keypoints() != k) {
            out.push_back({"keypoints", i,
                           "frame has " + std::to_string(f.num_keypoints()) +
                               " keypoints, expected " + std::to_string(k)});
            continue;
        }
        for (int c = 0; c < f.coords.size(); ++c) {
            if (!std::isfinite(f.coords[c])) {
                out.push_back({"keypoints", i, "non-finite coordinate in channel " + std::to_string(c)});
                break;
            }
        }
    }
    if (clip.keypoints.fps <= 0.0) {
        out.push_back({"fps", -1, "fps must be positive"});
    } else if (clip.audio.sample_rate > 0.0) {
        const double kp_span = frames.size() / clip.keypoints.fps;
        const double audio_span = clip.audio.duration_seconds();
        const double slack = 1.0 / clip.keypoints.fps;
        if (audio_span + slack < kp_span) {
            out.push_back({"audio", -1,
                           "audio covers " + std::to_string(audio_span) + " s but keypoints span " +
                               std::to_string(kp_span) + " s"});
        }
    }
    return out;
}

}  // namespace gdiff
