#include "gdiff/audio_features.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include "gdiff/clip_io.hpp"

namespace gdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW's planner is not thread safe; executing a plan is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// |rfft|^2 of a real block, zero-padded to fft_size.
class PowerSpectrum {
public:
    explicit PowerSpectrum(int fft_size) : n_(fft_size) {
        in_ = fftw_alloc_real(n_);
        out_ = fftw_alloc_complex(n_ / 2 + 1);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(n_, in_, out_, FFTW_ESTIMATE);
    }
    ~PowerSpectrum() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    PowerSpectrum(const PowerSpectrum&) = delete;
    PowerSpectrum& operator=(const PowerSpectrum&) = delete;

    // `block` must have at most fft_size entries.
    Eigen::VectorXd compute(const Eigen::VectorXd& block) {
        for (int i = 0; i < n_; ++i) in_[i] = i < block.size() ? block[i] : 0.0;
        fftw_execute(plan_);
        Eigen::VectorXd power(n_ / 2 + 1);
        for (int i = 0; i <= n_ / 2; ++i) {
            power[i] = out_[i][0] * out_[i][0] + out_[i][1] * out_[i][1];
        }
        return power;
    }

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

Eigen::VectorXd hann_window(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    return w;
}

// Window of `len` samples centered at `center`; zero beyond the edges.
Eigen::VectorXd padded_block(const std::vector<double>& x, std::int64_t center, int len) {
    Eigen::VectorXd block = Eigen::VectorXd::Zero(len);
    const std::int64_t start = center - len / 2;
    for (int i = 0; i < len; ++i) {
        const std::int64_t s = start + i;
        if (s >= 0 && s < static_cast<std::int64_t>(x.size())) block[i] = x[s];
    }
    return block;
}

}  // namespace

Eigen::MatrixXd mel_filterbank(int num_mel, int fft_size, double sample_rate) {
    const int bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(num_mel + 2);
    for (int i = 0; i < num_mel + 2; ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (num_mel + 1));
    }
    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(num_mel, bins);
    for (int b = 0; b < num_mel; ++b) {
        const double lo = edges[b], ce = edges[b + 1], hi = edges[b + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = k * sample_rate / fft_size;
            const double up = (f - lo) / (ce - lo);
            const double dn = (hi - f) / (hi - ce);
            fb(b, k) = std::max(0.0, std::min(up, dn));
        }
    }
    return fb;
}

Waveform to_mono_16k(const std::vector<std::vector<double>>& channels, double sample_rate) {
    if (channels.empty() || sample_rate <= 0.0) {
        throw std::invalid_argument("to_mono_16k: empty audio");
    }
    const size_t n = channels.front().size();
    std::vector<double> mono(n, 0.0);
    for (const auto& ch : channels) {
        if (ch.size() != n) throw std::invalid_argument("to_mono_16k: ragged channels");
        for (size_t i = 0; i < n; ++i) mono[i] += ch[i];
    }
    for (auto& s : mono) s /= static_cast<double>(channels.size());

    Waveform out;
    out.sample_rate = kAudioSampleRate;
    if (sample_rate == kAudioSampleRate) {
        out.samples = std::move(mono);
        return out;
    }
    if (n == 0) return out;
    // Linear interpolation onto the 16 kHz grid covering the same span.
    const double ratio = sample_rate / kAudioSampleRate;
    const auto out_len = static_cast<size_t>(std::floor((n - 1) / ratio)) + 1;
    out.samples.resize(out_len);
    for (size_t i = 0; i < out_len; ++i) {
        const double pos = i * ratio;
        const auto i0 = static_cast<size_t>(pos);
        const size_t i1 = std::min(i0 + 1, n - 1);
        const double frac = pos - i0;
        out.samples[i] = mono[i0] * (1.0 - frac) + mono[i1] * frac;
    }
    return out;
}

Waveform load_wav(const std::filesystem::path& path) {
    const RawWav raw = wav_read(path);
    return to_mono_16k(raw.channels, raw.sample_rate);
}

AudioFeatureSequence extract_features(const Waveform& w, int num_frames, const FeatureConfig& cfg) {
    if (num_frames <= 0) throw std::invalid_argument("extract_features: num_frames must be positive");
    if (w.sample_rate != kAudioSampleRate) {
        throw std::invalid_argument("extract_features: expected 16 kHz input (use load_wav)");
    }
    const Eigen::VectorXd window = hann_window(cfg.window_samples);
    const Eigen::MatrixXd fb = mel_filterbank(kAudioFeatureDim, cfg.window_samples, w.sample_rate);
    PowerSpectrum fft(cfg.window_samples);

    AudioFeatureSequence out;
    out.fps = cfg.fps;
    out.features.resize(num_frames, kAudioFeatureDim);
    for (int i = 0; i < num_frames; ++i) {
        const double center_s = (i + 0.5) / cfg.fps;
        const auto center = static_cast<std::int64_t>(std::llround(center_s * w.sample_rate));
        Eigen::VectorXd block = padded_block(w.samples, center, cfg.window_samples);
        block.array() *= window.array();
        const Eigen::VectorXd mel = fb * fft.compute(block);
        out.features.row(i) = mel.cwiseMax(cfg.log_floor).array().log().matrix().transpose();
    }
    return out;
}

BeatList detect_audio_beats(const Waveform& w, const BeatDetectConfig& cfg) {
    if (w.samples.empty() || w.sample_rate <= 0.0) {
        throw std::invalid_argument("detect_audio_beats: empty waveform");
    }
    BeatList beats;
    const int n = static_cast<int>(w.samples.size());
    const int num_frames = n < cfg.window_samples ? 0 : (n - cfg.window_samples) / cfg.hop_samples + 1;
    if (num_frames < 3) return beats;

    const Eigen::VectorXd window = hann_window(cfg.window_samples);
    const Eigen::MatrixXd fb = mel_filterbank(kAudioFeatureDim, cfg.fft_size, w.sample_rate);
    PowerSpectrum fft(cfg.fft_size);

    Eigen::MatrixXd logmel(num_frames, kAudioFeatureDim);
    for (int k = 0; k < num_frames; ++k) {
        Eigen::VectorXd block(cfg.window_samples);
        for (int i = 0; i < cfg.window_samples; ++i) block[i] = w.samples[k * cfg.hop_samples + i];
        block.array() *= window.array();
        const Eigen::VectorXd mel = fb * fft.compute(block);
        logmel.row(k) = mel.cwiseMax(cfg.log_floor).array().log().matrix().transpose();
    }

    // Positive spectral flux.
    Eigen::VectorXd flux = Eigen::VectorXd::Zero(num_frames);
    for (int k = 1; k < num_frames; ++k) {
        flux[k] = (logmel.row(k) - logmel.row(k - 1)).cwiseMax(0.0).sum();
    }
    const double mean = flux.mean();
    const double stddev = std::sqrt((flux.array() - mean).square().mean());
    const double threshold = mean + cfg.peak_delta * stddev;

    struct Peak {
        double t;
        double v;
    };
    std::vector<Peak> kept;
    for (int k = 1; k + 1 < num_frames; ++k) {
        if (flux[k] > flux[k - 1] && flux[k] >= flux[k + 1] && flux[k] > threshold) {
            const double t = (k * cfg.hop_samples + cfg.window_samples / 2.0) / w.sample_rate;
            if (!kept.empty() && t - kept.back().t < cfg.min_gap_seconds) {
                if (flux[k] > kept.back().v) kept.back() = {t, flux[k]};
            } else {
                kept.push_back({t, flux[k]});
            }
        }
    }
    beats.times.reserve(kept.size());
    for (const auto& p : kept) beats.times.push_back(p.t);
    return beats;
}

void write_feature_cache(const std::filesystem::path& clip_dir, const AudioFeatureSequence& feats) {
    const auto path = clip_dir / "features.bin";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::vector<float> buf(static_cast<size_t>(feats.features.rows()) * feats.features.cols());
    size_t idx = 0;
    for (int r = 0; r < feats.features.rows(); ++r) {
        for (int c = 0; c < feats.features.cols(); ++c) {
            buf[idx++] = static_cast<float>(feats.features(r, c));
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));

    ClipManifest m = read_manifest(clip_dir);
    m.audio_content_hash = file_content_hash(clip_dir / "audio.wav");
    write_manifest(clip_dir, m);
}

bool read_feature_cache(const std::filesystem::path& clip_dir, int expected_frames,
                        AudioFeatureSequence* out) {
    const auto path = clip_dir / "features.bin";
    if (!std::filesystem::exists(path)) return false;
    const ClipManifest m = read_manifest(clip_dir);
    if (!m.audio_content_hash ||
        *m.audio_content_hash != file_content_hash(clip_dir / "audio.wav")) {
        return false;  // stale cache
    }
    std::ifstream in(path, std::ios::binary);
    const size_t expect = static_cast<size_t>(expected_frames) * kAudioFeatureDim;
    std::vector<float> buf(expect);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != expect * sizeof(float)) return false;
    out->fps = m.fps;
    out->features.resize(expected_frames, kAudioFeatureDim);
    size_t idx = 0;
    for (int r = 0; r < expected_frames; ++r) {
        for (int c = 0; c < kAudioFeatureDim; ++c) out->features(r, c) = buf[idx++];
    }
    return true;
}

}  // namespace gdiff
