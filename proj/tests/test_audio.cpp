#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gdiff/audio_features.hpp"
#include "gdiff/clip_io.hpp"

using namespace gdiff;

namespace {

constexpr double kPi = 3.14159265358979323846;

Waveform tone(double hz, double seconds, double amp = 0.5, double sr = 16000.0) {
    Waveform w;
    w.sample_rate = sr;
    w.samples.resize(static_cast<size_t>(seconds * sr));
    for (size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = amp * std::sin(2.0 * kPi * hz * i / sr);
    }
    return w;
}

Waveform click_track(const std::vector<double>& times, double seconds) {
    Waveform w;
    w.sample_rate = 16000.0;
    w.samples.assign(static_cast<size_t>(seconds * 16000.0), 0.0);
    const double burst[] = {1.0, -1.0, 0.8, -0.8, 0.5, -0.5, 0.2, -0.2};
    for (const double t : times) {
        const auto start = static_cast<size_t>(t * 16000.0);
        for (size_t i = 0; i < 8 && start + i < w.samples.size(); ++i) {
            w.samples[start + i] = burst[i];
        }
    }
    return w;
}

}  // namespace

TEST_CASE("to_mono_16k keeps 16 kHz input unchanged") {
    const Waveform in = tone(100.0, 0.1);
    const Waveform out = to_mono_16k({in.samples}, 16000.0);
    REQUIRE(out.samples.size() == in.samples.size());
    for (size_t i = 0; i < out.samples.size(); ++i) CHECK(out.samples[i] == in.samples[i]);
}

TEST_CASE("to_mono_16k halves a 32 kHz file") {
    std::vector<double> samples(3200, 0.25);
    const Waveform out = to_mono_16k({samples}, 32000.0);
    CHECK(std::llabs(static_cast<long long>(out.samples.size()) - 1600) <= 1);
    CHECK(out.sample_rate == 16000.0);
}

TEST_CASE("opposite-polarity stereo cancels to silence") {
    std::vector<double> left(1600), right(1600);
    for (size_t i = 0; i < left.size(); ++i) {
        left[i] = std::sin(0.01 * i);
        right[i] = -left[i];
    }
    const Waveform out = to_mono_16k({left, right}, 16000.0);
    for (const double s : out.samples) CHECK(s == 0.0);
}

TEST_CASE("load_wav round trip through PCM16") {
    const auto path = std::filesystem::temp_directory_path() / "gdiff_test_tone.wav";
    const Waveform orig = tone(440.0, 0.5);
    wav_write(path, orig);
    const Waveform back = load_wav(path);
    REQUIRE(back.samples.size() == orig.samples.size());
    double max_err = 0.0;
    for (size_t i = 0; i < back.samples.size(); ++i) {
        max_err = std::max(max_err, std::abs(back.samples[i] - orig.samples[i]));
    }
    CHECK(max_err < 1e-3);  // 16-bit quantization
    std::filesystem::remove(path);
}

TEST_CASE("load_wav rejects missing and corrupt files") {
    CHECK_THROWS(load_wav("/nonexistent/audio.wav"));
    const auto path = std::filesystem::temp_directory_path() / "gdiff_test_corrupt.wav";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a wav file at all";
    }
    CHECK_THROWS(load_wav(path));
    std::filesystem::remove(path);
}

TEST_CASE("extract_features on silence hits the log floor everywhere") {
    Waveform silence;
    silence.sample_rate = 16000.0;
    silence.samples.assign(16000, 0.0);
    const AudioFeatureSequence feats = extract_features(silence, 25);
    CHECK(feats.features.rows() == 25);
    CHECK(feats.features.cols() == 32);
    const double floor_log = std::log(1e-10);
    CHECK((feats.features.array() - floor_log).abs().maxCoeff() < 1e-12);
}

TEST_CASE("extract_features shape contract and zero padding") {
    // 1.36 s of audio, 34 frames.
    const Waveform w = tone(200.0, 1.36);
    const AudioFeatureSequence feats = extract_features(w, 34);
    CHECK(feats.features.rows() == 34);
    CHECK(feats.features.cols() == 32);
    // Requesting more frames than the audio covers still yields the shape.
    const AudioFeatureSequence longer = extract_features(w, 60);
    CHECK(longer.features.rows() == 60);
    CHECK(longer.features.allFinite());
    CHECK_THROWS(extract_features(w, 0));
}

TEST_CASE("pure 440 Hz tone concentrates energy in the covering mel bins") {
    const Waveform w = tone(440.0, 2.0);
    const AudioFeatureSequence feats = extract_features(w, 50);

    // Closed-form mel mapping: 440 Hz falls inside triangular bins 5 and 6
    // for 32 bins over [0, 8 kHz].
    const Eigen::MatrixXd fb = mel_filterbank(32, 1024, 16000.0);
    int lo_bin = -1, hi_bin = -1;
    for (int b = 0; b < 32; ++b) {
        const int k440 = static_cast<int>(440.0 * 1024 / 16000.0);  // FFT bin below 440 Hz
        if (fb(b, k440) > 0.0 || fb(b, k440 + 1) > 0.0) {
            if (lo_bin < 0) lo_bin = b;
            hi_bin = b;
        }
    }
    CHECK(lo_bin == 5);
    CHECK(hi_bin == 6);

    // Interior frames (away from the zero-padded edges).
    for (int i = 2; i < 48; ++i) {
        int argmax = 0;
        feats.features.row(i).maxCoeff(&argmax);
        CHECK((argmax == 5 || argmax == 6));
        const Eigen::ArrayXd lin = feats.features.row(i).array().exp();
        CHECK((lin[5] + lin[6]) / lin.sum() > 0.99);
        // Tone bins identical across frames to 1e-6.
        CHECK(std::abs(feats.features(i, 5) - feats.features(2, 5)) < 1e-6);
        CHECK(std::abs(feats.features(i, 6) - feats.features(2, 6)) < 1e-6);
    }
}

TEST_CASE("extract_features is scale covariant in the log domain") {
    const Waveform w = tone(300.0, 1.0, 0.1);
    Waveform scaled = w;
    for (auto& s : scaled.samples) s *= 4.0;
    const auto f1 = extract_features(w, 20);
    const auto f2 = extract_features(scaled, 20);
    const double shift = std::log(16.0);  // log(g^2)
    for (int i = 0; i < 20; ++i) {
        for (int b = 0; b < 32; ++b) {
            const double v1 = f1.features(i, b);
            if (v1 > std::log(1e-10) + shift + 1.0) {  // clear of the floor clamp
                CHECK(f2.features(i, b) - v1 == doctest::Approx(shift).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("detect_audio_beats finds clicks within 20 ms") {
    const Waveform two = click_track({0.5, 1.5}, 2.0);
    const BeatList beats = detect_audio_beats(two);
    REQUIRE(beats.times.size() == 2);
    CHECK(std::abs(beats.times[0] - 0.5) < 0.02);
    CHECK(std::abs(beats.times[1] - 1.5) < 0.02);

    const Waveform one = click_track({0.43}, 1.0);
    CHECK(detect_audio_beats(one).times.size() == 1);

    Waveform silence;
    silence.sample_rate = 16000.0;
    silence.samples.assign(16000, 0.0);
    CHECK(detect_audio_beats(silence).times.empty());
}

TEST_CASE("beat detection is invariant under polarity flip and stays in range") {
    const Waveform w = click_track({0.2, 0.7, 1.3}, 1.6);
    Waveform flipped = w;
    for (auto& s : flipped.samples) s = -s;
    const BeatList a = detect_audio_beats(w);
    const BeatList b = detect_audio_beats(flipped);
    REQUIRE(a.times.size() == b.times.size());
    for (size_t i = 0; i < a.times.size(); ++i) {
        CHECK(a.times[i] == doctest::Approx(b.times[i]));
        CHECK(a.times[i] >= 0.0);
        CHECK(a.times[i] <= w.duration_seconds());
    }
    // Strictly increasing.
    for (size_t i = 1; i < a.times.size(); ++i) CHECK(a.times[i] > a.times[i - 1]);
}

TEST_CASE("feature cache round trip keyed by audio hash") {
    const auto dir = std::filesystem::temp_directory_path() / "gdiff_test_cache";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    GestureClip clip;
    clip.id = "cache";
    KeypointFrame f;
    f.coords = Eigen::VectorXd::Constant(4, 0.5);
    clip.keypoints.frames = {f, f, f};
    clip.audio = tone(250.0, 3.0 / 25.0 + 0.01);
    write_clip(dir, clip);

    const AudioFeatureSequence feats = extract_features(clip.audio, 3);
    write_feature_cache(dir, feats);

    AudioFeatureSequence cached;
    REQUIRE(read_feature_cache(dir, 3, &cached));
    CHECK((cached.features - feats.features).cwiseAbs().maxCoeff() < 1e-6);

    // Replacing the audio invalidates the cache.
    wav_write(dir / "audio.wav", tone(500.0, 0.2));
    CHECK_FALSE(read_feature_cache(dir, 3, &cached));
    std::filesystem::remove_all(dir);
}
