#include "gdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "gdiff/rng.hpp"

namespace gdiff {

// ---------------------------------------------------------------------------
// Autoencoder

KeypointAutoencoder::KeypointAutoencoder(const AutoencoderConfig& cfg, int frame_dim)
    : cfg_(cfg), frame_dim_(frame_dim) {
    if (cfg.latent_dim <= 0 || cfg.hidden_dim <= 0 || cfg.window <= 0 || frame_dim <= 0) {
        throw std::invalid_argument("autoencoder: dimensions must be positive");
    }
    enc1_w.setZero(frame_dim, cfg.hidden_dim);
    enc1_b.setZero(cfg.hidden_dim);
    enc2_w.setZero(cfg.hidden_dim, cfg.latent_dim);
    enc2_b.setZero(cfg.latent_dim);
    dec1_w.setZero(cfg.latent_dim, cfg.hidden_dim);
    dec1_b.setZero(cfg.hidden_dim);
    temporal_.setZero(cfg.window, cfg.hidden_dim);
    dec2_w.setZero(cfg.hidden_dim, frame_dim);
    dec2_b.setZero(frame_dim);
}

Eigen::VectorXd KeypointAutoencoder::encode(const Eigen::MatrixXd& window) const {
    if (window.rows() != cfg_.window || window.cols() != frame_dim_) {
        throw std::invalid_argument("autoencoder encode: window shape mismatch");
    }
    const Eigen::RowVectorXd pooled =
        ((window * enc1_w).rowwise() + enc1_b).colwise().mean();
    return ((pooled * enc2_w) + enc2_b).transpose();
}

Eigen::MatrixXd KeypointAutoencoder::decode(const Eigen::VectorXd& latent) const {
    const Eigen::RowVectorXd h = latent.transpose() * dec1_w + dec1_b;
    Eigen::MatrixXd per_frame = temporal_.rowwise() + h;
    return ((per_frame * dec2_w).rowwise() + dec2_b);
}

double KeypointAutoencoder::reconstruction_mse(const std::vector<Eigen::MatrixXd>& windows) const {
    if (windows.empty()) return 0.0;
    double total = 0.0;
    for (const auto& w : windows) {
        total += (decode(encode(w)) - w).squaredNorm() / static_cast<double>(w.size());
    }
    return total / static_cast<double>(windows.size());
}

std::vector<double> KeypointAutoencoder::train(const std::vector<Eigen::MatrixXd>& windows,
                                               std::uint64_t seed) {
    if (windows.empty()) throw std::invalid_argument("autoencoder train: empty dataset");
    Rng rng(seed);
    auto gauss_fill = [&](Eigen::MatrixXd& m, double scale) {
        for (int c = 0; c < m.cols(); ++c)
            for (int r = 0; r < m.rows(); ++r) m(r, c) = scale * rng.gaussian();
    };
    gauss_fill(enc1_w, 1.0 / std::sqrt(static_cast<double>(frame_dim_)));
    gauss_fill(enc2_w, 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim)));
    gauss_fill(dec1_w, 1.0 / std::sqrt(static_cast<double>(cfg_.latent_dim)));
    gauss_fill(dec2_w, 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim)));
    gauss_fill(temporal_, 0.02);

    // Mirror the parameters in a flat vector for a plain Adam loop.
    struct Slot {
        Eigen::MatrixXd* w = nullptr;
        Eigen::RowVectorXd* b = nullptr;
    };
    const std::vector<Slot> slots = {{&enc1_w, nullptr}, {nullptr, &enc1_b}, {&enc2_w, nullptr},
                                     {nullptr, &enc2_b}, {&dec1_w, nullptr}, {nullptr, &dec1_b},
                                     {&temporal_, nullptr}, {&dec2_w, nullptr}, {nullptr, &dec2_b}};

    struct Grads {
        Eigen::MatrixXd enc1, enc2, dec1, temporal, dec2;
        Eigen::RowVectorXd b_enc1, b_enc2, b_dec1, b_dec2;
    };

    std::vector<Eigen::MatrixXd> m_w(slots.size()), v_w(slots.size());
    std::vector<Eigen::RowVectorXd> m_b(slots.size()), v_b(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].w) {
            m_w[i].setZero(slots[i].w->rows(), slots[i].w->cols());
            v_w[i] = m_w[i];
        } else {
            m_b[i].setZero(slots[i].b->size());
            v_b[i] = m_b[i];
        }
    }

    const int n = cfg_.window;
    const double inv_n = 1.0 / n;
    std::vector<double> trace;
    trace.reserve(cfg_.train_steps);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    for (int step = 1; step <= cfg_.train_steps; ++step) {
        Grads g;
        g.enc1.setZero(enc1_w.rows(), enc1_w.cols());
        g.enc2.setZero(enc2_w.rows(), enc2_w.cols());
        g.dec1.setZero(dec1_w.rows(), dec1_w.cols());
        g.temporal.setZero(temporal_.rows(), temporal_.cols());
        g.dec2.setZero(dec2_w.rows(), dec2_w.cols());
        g.b_enc1.setZero(enc1_b.size());
        g.b_enc2.setZero(enc2_b.size());
        g.b_dec1.setZero(dec1_b.size());
        g.b_dec2.setZero(dec2_b.size());

        const int batch = std::min<int>(cfg_.batch_size, static_cast<int>(windows.size()));
        double loss = 0.0;
        for (int bi = 0; bi < batch; ++bi) {
            const Eigen::MatrixXd& w =
                windows[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(windows.size()) - 1))];
            const Eigen::MatrixXd frame_feats = (w * enc1_w).rowwise() + enc1_b;
            const Eigen::RowVectorXd pooled = frame_feats.colwise().mean();
            const Eigen::RowVectorXd z = pooled * enc2_w + enc2_b;
            const Eigen::RowVectorXd h = z * dec1_w + dec1_b;
            const Eigen::MatrixXd per_frame = temporal_.rowwise() + h;
            const Eigen::MatrixXd recon = (per_frame * dec2_w).rowwise() + dec2_b;

            const Eigen::MatrixXd diff = recon - w;
            loss += diff.squaredNorm() / static_cast<double>(w.size());
            const Eigen::MatrixXd d_recon = (2.0 / static_cast<double>(w.size())) * diff;

            g.dec2 += per_frame.transpose() * d_recon;
            g.b_dec2 += d_recon.colwise().sum();
            const Eigen::MatrixXd d_per_frame = d_recon * dec2_w.transpose();
            g.temporal += d_per_frame;
            const Eigen::RowVectorXd d_h = d_per_frame.colwise().sum();
            g.dec1 += z.transpose() * d_h;
            g.b_dec1 += d_h;
            const Eigen::RowVectorXd d_z = d_h * dec1_w.transpose();
            g.enc2 += pooled.transpose() * d_z;
            g.b_enc2 += d_z;
            const Eigen::RowVectorXd d_pooled = d_z * enc2_w.transpose();
            const Eigen::MatrixXd d_frame_feats = Eigen::MatrixXd::Ones(n, 1) * (inv_n * d_pooled);
            g.enc1 += w.transpose() * d_frame_feats;
            g.b_enc1 += d_frame_feats.colwise().sum();
        }
        loss /= batch;
        trace.push_back(loss);

        const double scale = 1.0 / batch;
        const double bc1 = 1.0 - std::pow(b1, step);
        const double bc2 = 1.0 - std::pow(b2, step);
        Eigen::MatrixXd* grads_w[] = {&g.enc1, nullptr, &g.enc2, nullptr, &g.dec1,
                                      nullptr, &g.temporal, &g.dec2, nullptr};
        Eigen::RowVectorXd* grads_b[] = {nullptr, &g.b_enc1, nullptr, &g.b_enc2, nullptr,
                                         &g.b_dec1, nullptr, nullptr, &g.b_dec2};
        for (size_t i = 0; i < slots.size(); ++i) {
            if (slots[i].w) {
                const Eigen::MatrixXd gm = scale * (*grads_w[i]);
                m_w[i] = b1 * m_w[i] + (1 - b1) * gm;
                v_w[i] = b2 * v_w[i] + (1 - b2) * gm.cwiseProduct(gm);
                slots[i].w->array() -=
                    cfg_.lr * (m_w[i].array() / bc1) / ((v_w[i].array() / bc2).sqrt() + eps);
            } else {
                const Eigen::RowVectorXd gb = scale * (*grads_b[i]);
                m_b[i] = b1 * m_b[i] + (1 - b1) * gb;
                v_b[i] = b2 * v_b[i] + (1 - b2) * gb.cwiseProduct(gb);
                slots[i].b->array() -=
                    cfg_.lr * (m_b[i].array() / bc1) / ((v_b[i].array() / bc2).sqrt() + eps);
            }
        }
    }
    return trace;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

}  // namespace

void KeypointAutoencoder::save(const std::filesystem::path& path) const {
    nlohmann::json j{{"latent_dim", cfg_.latent_dim},
                     {"window", cfg_.window},
                     {"hidden_dim", cfg_.hidden_dim},
                     {"frame_dim", frame_dim_},
                     {"enc1_w", matrix_to_json(enc1_w)},
                     {"enc1_b", matrix_to_json(enc1_b)},
                     {"enc2_w", matrix_to_json(enc2_w)},
                     {"enc2_b", matrix_to_json(enc2_b)},
                     {"dec1_w", matrix_to_json(dec1_w)},
                     {"dec1_b", matrix_to_json(dec1_b)},
                     {"temporal", matrix_to_json(temporal_)},
                     {"dec2_w", matrix_to_json(dec2_w)},
                     {"dec2_b", matrix_to_json(dec2_b)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << "\n";
}

KeypointAutoencoder KeypointAutoencoder::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    AutoencoderConfig cfg;
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    KeypointAutoencoder ae(cfg, j.at("frame_dim").get<int>());
    ae.enc1_w = matrix_from_json(j.at("enc1_w"));
    ae.enc1_b = matrix_from_json(j.at("enc1_b")).row(0);
    ae.enc2_w = matrix_from_json(j.at("enc2_w"));
    ae.enc2_b = matrix_from_json(j.at("enc2_b")).row(0);
    ae.dec1_w = matrix_from_json(j.at("dec1_w"));
    ae.dec1_b = matrix_from_json(j.at("dec1_b")).row(0);
    ae.temporal_ = matrix_from_json(j.at("temporal"));
    ae.dec2_w = matrix_from_json(j.at("dec2_w"));
    ae.dec2_b = matrix_from_json(j.at("dec2_b")).row(0);
    return ae;
}

KeypointAutoencoder train_autoencoder(const std::vector<Eigen::MatrixXd>& windows,
                                      const AutoencoderConfig& cfg, std::uint64_t seed,
                                      double* holdout_mse) {
    if (windows.empty()) throw std::invalid_argument("train_autoencoder: empty dataset");
    const int frame_dim = static_cast<int>(windows.front().cols());

    // Deterministic held-out split (every k-th window).
    std::vector<Eigen::MatrixXd> train_set, holdout;
    const int holdout_every =
        cfg.holdout_fraction > 0.0 ? std::max(2, static_cast<int>(1.0 / cfg.holdout_fraction)) : 0;
    for (size_t i = 0; i < windows.size(); ++i) {
        if (holdout_every > 0 && i % holdout_every == holdout_every - 1 && windows.size() > 4) {
            holdout.push_back(windows[i]);
        } else {
            train_set.push_back(windows[i]);
        }
    }
    if (train_set.empty()) train_set = windows;

    KeypointAutoencoder ae(cfg, frame_dim);
    ae.train(train_set, seed);
    if (holdout_mse != nullptr) {
        *holdout_mse = ae.reconstruction_mse(holdout.empty() ? train_set : holdout);
    }
    return ae;
}

double diversity(const std::vector<Eigen::MatrixXd>& gen_windows,
                 const std::vector<Eigen::MatrixXd>& gt_windows, const EncodeFn& encode,
                 std::int64_t max_pairs, std::uint64_t pair_seed) {
    if (gen_windows.empty() || gt_windows.empty()) {
        throw std::invalid_argument("diversity: both window sets must be non-empty");
    }
    std::vector<Eigen::VectorXd> fg, ft;
    fg.reserve(gen_windows.size());
    ft.reserve(gt_windows.size());
    for (const auto& w : gen_windows) fg.push_back(encode(w));
    for (const auto& w : gt_windows) ft.push_back(encode(w));

    const std::int64_t pairs = static_cast<std::int64_t>(fg.size()) * ft.size();
    double total = 0.0;
    if (pairs <= max_pairs) {
        for (const auto& a : fg)
            for (const auto& b : ft) total += (a - b).norm();
        return total / static_cast<double>(pairs);
    }
    Rng rng(pair_seed);
    for (std::int64_t i = 0; i < max_pairs; ++i) {
        const auto& a = fg[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(fg.size()) - 1))];
        const auto& b = ft[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(ft.size()) - 1))];
        total += (a - b).norm();
    }
    return total / static_cast<double>(max_pairs);
}

double diversity(const std::vector<Eigen::MatrixXd>& gen_windows,
                 const std::vector<Eigen::MatrixXd>& gt_windows,
                 const KeypointAutoencoder& encoder, std::int64_t max_pairs,
                 std::uint64_t pair_seed) {
    return diversity(gen_windows, gt_windows,
                     [&encoder](const Eigen::MatrixXd& w) { return encoder.encode(w); }, max_pairs,
                     pair_seed);
}

// ---------------------------------------------------------------------------
// Beats

BeatList detect_motion_beats(const KeypointSequence& seq, const MotionBeatConfig& cfg) {
    const int n = seq.length();
    if (n < 3) throw std::invalid_argument("detect_motion_beats: need at least 3 frames");
    const int k = seq.num_keypoints();

    // Mean keypoint speed per frame transition.
    Eigen::VectorXd speed(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        double total = 0.0;
        for (int p = 0; p < k; ++p) {
            const double dx = seq.frames[i + 1].x(p) - seq.frames[i].x(p);
            const double dy = seq.frames[i + 1].y(p) - seq.frames[i].y(p);
            total += std::sqrt(dx * dx + dy * dy);
        }
        speed[i] = total / k;
    }

    std::vector<double> sorted(speed.data(), speed.data() + speed.size());
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    BeatList beats;
    if (median <= 0.0) return beats;  // static sequence

    const double threshold = cfg.median_fraction * median;
    for (int i = 1; i + 1 < speed.size(); ++i) {
        if (speed[i] <= speed[i - 1] && speed[i] < speed[i + 1] && speed[i] < threshold) {
            const double t = (i + 0.5) / seq.fps;
            if (!beats.times.empty() && t - beats.times.back() < cfg.min_gap_seconds) continue;
            beats.times.push_back(t);
        }
    }
    return beats;
}

double beat_consistency(const BeatAlignment& alignment) {
    if (alignment.audio_beats.times.empty()) {
        throw std::invalid_argument("beat_consistency: audio beats must be non-empty");
    }
    if (!(alignment.sigma_bc > 0.0)) {
        throw std::invalid_argument("beat_consistency: sigma_bc must be positive");
    }
    if (alignment.motion_beats.times.empty()) return 0.0;
    const double denom = 2.0 * alignment.sigma_bc * alignment.sigma_bc;
    double total = 0.0;
    for (const double b : alignment.audio_beats.times) {
        double best = std::numeric_limits<double>::infinity();
        for (const double m : alignment.motion_beats.times) {
            best = std::min(best, (b - m) * (b - m));
        }
        total += std::exp(-best / denom);
    }
    return total / static_cast<double>(alignment.audio_beats.times.size());
}

std::filesystem::path export_frames_manifest(const std::filesystem::path& frames_dir, double fps,
                                             const std::function<void(const std::string&)>& warn) {
    if (!std::filesystem::is_directory(frames_dir)) {
        throw std::invalid_argument("export_frames_manifest: not a directory: " + frames_dir.string());
    }
    std::vector<std::string> images;
    for (const auto& entry : std::filesystem::directory_iterator(frames_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") {
            images.push_back(entry.path().filename().string());
        } else if (entry.path().filename() != "frames_manifest.json" &&
                   entry.path().filename() != "preview_meta.json") {
            if (warn) warn("skipping non-image file " + entry.path().filename().string());
        }
    }
    if (images.empty()) {
        throw std::runtime_error("export_frames_manifest: no image files in " + frames_dir.string());
    }
    std::sort(images.begin(), images.end());

    nlohmann::json frames = nlohmann::json::array();
    for (size_t i = 0; i < images.size(); ++i) {
        frames.push_back({{"file", images[i]}, {"t", static_cast<double>(i) / fps}});
    }
    nlohmann::json j{{"fps", fps}, {"frames", std::move(frames)}};
    const auto path = frames_dir / "frames_manifest.json";
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    return path;
}

}  // namespace gdiff
