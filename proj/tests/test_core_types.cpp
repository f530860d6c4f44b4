#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gdiff/clip_io.hpp"
#include "gdiff/core_types.hpp"
#include "gdiff/rng.hpp"

using namespace gdiff;

namespace {

KeypointSequence seq_from(const std::vector<std::vector<double>>& rows, double fps = 25.0) {
    KeypointSequence s;
    s.fps = fps;
    for (const auto& r : rows) {
        KeypointFrame f;
        f.coords = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<int>(r.size()));
        s.frames.push_back(f);
    }
    return s;
}

}  // namespace

TEST_CASE("compute_stats forced arithmetic on a single clip") {
    const auto seq = seq_from({{0.0, 0.0}, {2.0, 2.0}});
    const NormalizationStats stats = compute_stats({seq});
    CHECK(stats.mean[0] == doctest::Approx(1.0));
    CHECK(stats.mean[1] == doctest::Approx(1.0));
    CHECK(stats.stddev[0] == doctest::Approx(1.0));  // population std
    CHECK(stats.stddev[1] == doctest::Approx(1.0));
}

TEST_CASE("compute_stats clamps degenerate variance") {
    const auto seq = seq_from({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    const NormalizationStats stats = compute_stats({seq});
    CHECK(stats.mean[0] == doctest::Approx(0.5));
    CHECK(stats.stddev[0] == doctest::Approx(kStdFloor));
}

TEST_CASE("compute_stats matches a two-pass oracle on random data") {
    Rng rng(7);
    const int frames = 1000, k = 3;
    std::vector<std::vector<double>> rows(frames, std::vector<double>(2 * k));
    for (auto& r : rows)
        for (auto& v : r) v = rng.gaussian() * 0.3 + 0.5;
    const auto seq = seq_from(rows);
    const NormalizationStats stats = compute_stats({seq});

    // Independent scalar-loop oracle.
    for (int c = 0; c < 2 * k; ++c) {
        double sum = 0.0;
        for (const auto& r : rows) sum += r[c];
        const double mean = sum / frames;
        double sq = 0.0;
        for (const auto& r : rows) sq += (r[c] - mean) * (r[c] - mean);
        const double stddev = std::sqrt(sq / frames);
        CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-9));
        CHECK(stats.stddev[c] == doctest::Approx(stddev).epsilon(1e-9));
    }
}

TEST_CASE("compute_stats rejects empty and mismatched datasets") {
    CHECK_THROWS(compute_stats({}));
    const auto a = seq_from({{0.0, 0.0}});
    const auto b = seq_from({{0.0, 0.0, 1.0, 1.0}});
    CHECK_THROWS(compute_stats({a, b}));
}

TEST_CASE("compute_stats is invariant to clip order and concatenation") {
    Rng rng(11);
    auto random_seq = [&](int frames) {
        std::vector<std::vector<double>> rows(frames, std::vector<double>(4));
        for (auto& r : rows)
            for (auto& v : r) v = rng.uniform();
        return seq_from(rows);
    };
    const auto a = random_seq(17), b = random_seq(23), c = random_seq(5);
    const auto s1 = compute_stats({a, b, c});
    const auto s2 = compute_stats({c, a, b});
    // Concatenated into one clip.
    KeypointSequence cat = a;
    for (const auto& f : b.frames) cat.frames.push_back(f);
    for (const auto& f : c.frames) cat.frames.push_back(f);
    const auto s3 = compute_stats({cat});
    CHECK((s1.mean - s2.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s1.stddev - s2.stddev).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s1.mean - s3.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s1.stddev - s3.stddev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize forced values and round trip") {
    NormalizationStats identity;
    identity.mean = Eigen::VectorXd::Zero(2);
    identity.stddev = Eigen::VectorXd::Ones(2);
    const auto seq = seq_from({{0.25, 0.75}});
    const auto same = normalize(seq, identity);
    CHECK(same.frames[0].coords[0] == doctest::Approx(0.25));

    NormalizationStats stats;
    stats.mean = Eigen::VectorXd::Constant(2, 1.0);
    stats.stddev = Eigen::VectorXd::Constant(2, 2.0);
    const auto n = normalize(seq_from({{2.0, 2.0}}), stats);
    CHECK(n.frames[0].coords[0] == doctest::Approx(0.5));
    const auto d = denormalize(seq_from({{0.5, 0.5}}), stats);
    CHECK(d.frames[0].coords[0] == doctest::Approx(2.0));

    // Round trip with random stats.
    Rng rng(3);
    NormalizationStats rs;
    rs.mean = Eigen::VectorXd::NullaryExpr(2, [&](int) { return rng.gaussian(); });
    rs.stddev = Eigen::VectorXd::NullaryExpr(2, [&](int) { return 0.1 + rng.uniform(); });
    const auto orig = seq_from({{0.1, 0.9}, {0.4, 0.6}});
    const auto round = denormalize(normalize(orig, rs), rs);
    for (int i = 0; i < 2; ++i) {
        CHECK(round.frames[i].coords.isApprox(orig.frames[i].coords, 1e-9));
    }
}

TEST_CASE("normalized dataset has zero mean and unit std under its own stats") {
    Rng rng(5);
    std::vector<KeypointSequence> dataset;
    for (int c = 0; c < 3; ++c) {
        std::vector<std::vector<double>> rows(50, std::vector<double>(6));
        for (auto& r : rows)
            for (auto& v : r) v = 0.5 + 0.2 * rng.gaussian();
        dataset.push_back(seq_from(rows));
    }
    const auto stats = compute_stats(dataset);
    std::vector<KeypointSequence> normed;
    for (const auto& s : dataset) normed.push_back(normalize(s, stats));
    const auto post = compute_stats(normed);
    CHECK(post.mean.cwiseAbs().maxCoeff() < 1e-6);
    CHECK((post.stddev.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("normalize rejects K mismatch") {
    NormalizationStats stats;
    stats.mean = Eigen::VectorXd::Zero(4);
    stats.stddev = Eigen::VectorXd::Ones(4);
    CHECK_THROWS(normalize(seq_from({{0.0, 0.0}}), stats));
}

TEST_CASE("validate_clip reports violations without throwing") {
    GestureClip good;
    good.id = "good";
    good.keypoints = seq_from({{0.1, 0.2}, {0.3, 0.4}});
    good.audio.sample_rate = 16000.0;
    good.audio.samples.assign(16000 * 2 / 25, 0.0);
    CHECK(validate_clip(good).empty());

    GestureClip nan_clip = good;
    nan_clip.keypoints.frames[1].coords[0] = std::nan("");
    const auto violations = validate_clip(nan_clip);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].frame_index == 1);
    CHECK(violations[0].field == "keypoints");

    // Audio 0.2 s shorter than the keypoint span at 25 FPS.
    GestureClip short_audio;
    short_audio.id = "short";
    std::vector<std::vector<double>> rows(25, std::vector<double>{0.5, 0.5});
    short_audio.keypoints = seq_from(rows);  // spans 1.0 s
    short_audio.audio.sample_rate = 16000.0;
    short_audio.audio.samples.assign(static_cast<size_t>(16000 * 0.8), 0.0);
    const auto v2 = validate_clip(short_audio);
    REQUIRE(v2.size() == 1);
    CHECK(v2[0].field == "audio");
}

TEST_CASE("clip round-trips through the on-disk format") {
    const auto dir = std::filesystem::temp_directory_path() / "gdiff_test_clip";
    std::filesystem::remove_all(dir);

    GestureClip clip;
    clip.id = "roundtrip";
    Rng rng(13);
    std::vector<std::vector<double>> rows(10, std::vector<double>(8));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform();
    clip.keypoints = seq_from(rows);
    clip.audio.sample_rate = 16000.0;
    clip.audio.samples.resize(6400);
    for (auto& s : clip.audio.samples) s = 0.5 * std::sin(s);

    write_clip(dir, clip);
    const GestureClip back = read_clip(dir);
    CHECK(back.id == clip.id);
    CHECK(back.keypoints.length() == 10);
    CHECK(back.keypoints.num_keypoints() == 4);
    // float32 storage: 1e-6 relative
    for (int i = 0; i < 10; ++i) {
        CHECK((back.keypoints.frames[i].coords - clip.keypoints.frames[i].coords)
                  .cwiseAbs()
                  .maxCoeff() < 1e-6);
    }
    CHECK(back.audio.samples.size() == clip.audio.samples.size());

    const NormalizationStats stats = compute_stats({clip.keypoints});
    write_stats(dir / "stats.json", stats);
    const NormalizationStats s2 = read_stats(dir / "stats.json");
    CHECK((s2.mean - stats.mean).cwiseAbs().maxCoeff() < 1e-12);

    std::filesystem::remove_all(dir);
}
