#include "gdiff/clip_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gdiff {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

void save_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace

void write_manifest(const fs::path& dir, const ClipManifest& m) {
    json j{{"id", m.id},
           {"fps", m.fps},
           {"num_frames", m.num_frames},
           {"num_keypoints", m.num_keypoints}};
    if (m.audio_content_hash) j["audio_content_hash"] = *m.audio_content_hash;
    save_json(dir / "manifest.json", j);
}

ClipManifest read_manifest(const fs::path& dir) {
    const json j = load_json(dir / "manifest.json");
    ClipManifest m;
    m.id = j.at("id").get<std::string>();
    m.fps = j.at("fps").get<double>();
    m.num_frames = j.at("num_frames").get<int>();
    m.num_keypoints = j.at("num_keypoints").get<int>();
    if (j.contains("audio_content_hash")) {
        m.audio_content_hash = j["audio_content_hash"].get<std::string>();
    }
    return m;
}

void write_keypoints_bin(const fs::path& path, const Eigen::MatrixXd& mat) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::vector<float> buf(static_cast<size_t>(mat.rows()) * mat.cols());
    size_t idx = 0;
    for (int r = 0; r < mat.rows(); ++r) {
        for (int c = 0; c < mat.cols(); ++c) buf[idx++] = static_cast<float>(mat(r, c));
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Eigen::MatrixXd read_keypoints_bin(const fs::path& path, int num_frames, int num_keypoints) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const size_t expect = static_cast<size_t>(num_frames) * num_keypoints * 2;
    std::vector<float> buf(expect);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != expect * sizeof(float)) {
        throw std::runtime_error("keypoints.bin truncated: " + path.string());
    }
    Eigen::MatrixXd mat(num_frames, num_keypoints * 2);
    size_t idx = 0;
    for (int r = 0; r < num_frames; ++r) {
        for (int c = 0; c < mat.cols(); ++c) mat(r, c) = buf[idx++];
    }
    return mat;
}

void write_clip(const fs::path& dir, const GestureClip& clip) {
    fs::create_directories(dir);
    ClipManifest m;
    m.id = clip.id;
    m.fps = clip.keypoints.fps;
    m.num_frames = clip.keypoints.length();
    m.num_keypoints = clip.keypoints.num_keypoints();
    write_manifest(dir, m);
    write_keypoints_bin(dir / "keypoints.bin", sequence_to_matrix(clip.keypoints));
    if (!clip.audio.samples.empty()) wav_write(dir / "audio.wav", clip.audio);
}

GestureClip read_clip(const fs::path& dir) {
    const ClipManifest m = read_manifest(dir);
    GestureClip clip;
    clip.id = m.id;
    clip.keypoints =
        matrix_to_sequence(read_keypoints_bin(dir / "keypoints.bin", m.num_frames, m.num_keypoints), m.fps);
    const fs::path wav = dir / "audio.wav";
    if (fs::exists(wav)) {
        const RawWav raw = wav_read(wav);
        clip.audio.sample_rate = raw.sample_rate;
        if (!raw.channels.empty()) {
            const size_t n = raw.channels.front().size();
            clip.audio.samples.assign(n, 0.0);
            for (const auto& ch : raw.channels) {
                for (size_t i = 0; i < n; ++i) clip.audio.samples[i] += ch[i];
            }
            for (auto& s : clip.audio.samples) s /= static_cast<double>(raw.channels.size());
        }
    }
    return clip;
}

void write_stats(const fs::path& path, const NormalizationStats& stats) {
    json j;
    j["mean"] = std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size());
    j["std"] = std::vector<double>(stats.stddev.data(), stats.stddev.data() + stats.stddev.size());
    save_json(path, j);
}

NormalizationStats read_stats(const fs::path& path) {
    const json j = load_json(path);
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto stddev = j.at("std").get<std::vector<double>>();
    if (mean.size() != stddev.size()) throw std::runtime_error("stats.json: mean/std length mismatch");
    NormalizationStats s;
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<int>(mean.size()));
    s.stddev = Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<int>(stddev.size()));
    return s;
}

std::vector<fs::path> list_clip_dirs(const fs::path& dataset_dir) {
    if (!fs::is_directory(dataset_dir)) {
        throw std::runtime_error("not a dataset directory: " + dataset_dir.string());
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(dataset_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

RawWav wav_read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open wav file: " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 44 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
        std::memcmp(data.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("not a RIFF/WAVE file: " + path.string());
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* pcm = nullptr;
    std::uint32_t pcm_bytes = 0;

    size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const char* tag = reinterpret_cast<const char*>(data.data() + pos);
        const std::uint32_t chunk = rd_u32(data.data() + pos + 4);
        const unsigned char* body = data.data() + pos + 8;
        if (pos + 8 + chunk > data.size()) break;
        if (std::memcmp(tag, "fmt ", 4) == 0 && chunk >= 16) {
            format = rd_u16(body);
            channels = rd_u16(body + 2);
            rate = rd_u32(body + 4);
            bits = rd_u16(body + 14);
            if (format == 0xFFFE && chunk >= 40) format = rd_u16(body + 24);  // extensible
        } else if (std::memcmp(tag, "data", 4) == 0) {
            pcm = body;
            pcm_bytes = chunk;
        }
        pos += 8 + chunk + (chunk & 1);
    }
    if (pcm == nullptr || channels == 0 || rate == 0) {
        throw std::runtime_error("corrupt wav file (missing fmt/data): " + path.string());
    }
    const bool is_pcm = format == 1;
    const bool is_float = format == 3;
    if (!is_pcm && !is_float) {
        throw std::runtime_error("unsupported wav encoding (format tag " + std::to_string(format) +
                                 "): " + path.string());
    }
    const int bytes_per = bits / 8;
    if ((is_pcm && bits != 8 && bits != 16 && bits != 24 && bits != 32) ||
        (is_float && bits != 32 && bits != 64)) {
        throw std::runtime_error("unsupported wav bit depth " + std::to_string(bits) + ": " + path.string());
    }
    const std::uint32_t num_frames = pcm_bytes / (bytes_per * channels);

    RawWav out;
    out.sample_rate = static_cast<double>(rate);
    out.channels.assign(channels, std::vector<double>(num_frames));
    for (std::uint32_t i = 0; i < num_frames; ++i) {
        for (int c = 0; c < channels; ++c) {
            const unsigned char* p = pcm + (static_cast<size_t>(i) * channels + c) * bytes_per;
            double v = 0.0;
            if (is_float && bits == 32) {
                float f;
                std::memcpy(&f, p, 4);
                v = f;
            } else if (is_float && bits == 64) {
                std::memcpy(&v, p, 8);
            } else if (bits == 8) {
                v = (static_cast<int>(p[0]) - 128) / 128.0;
            } else if (bits == 16) {
                v = static_cast<std::int16_t>(p[0] | (p[1] << 8)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
                if (s & 0x800000) s |= 0xFF000000;
                v = s / 8388608.0;
            } else {
                std::int32_t s;
                std::memcpy(&s, p, 4);
                v = s / 2147483648.0;
            }
            out.channels[c][i] = v;
        }
    }
    return out;
}

void wav_write(const fs::path& path, const Waveform& mono) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write wav file: " + path.string());
    const std::uint32_t n = static_cast<std::uint32_t>(mono.samples.size());
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(mono.sample_rate));
    const std::uint32_t data_bytes = n * 2;

    auto w_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    auto w_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
        out.write(reinterpret_cast<char*>(b), 2);
    };

    out.write("RIFF", 4);
    w_u32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    w_u32(16);
    w_u16(1);  // PCM
    w_u16(1);  // mono
    w_u32(rate);
    w_u32(rate * 2);
    w_u16(2);
    w_u16(16);
    out.write("data", 4);
    w_u32(data_bytes);
    for (std::uint32_t i = 0; i < n; ++i) {
        const double clamped = std::min(1.0, std::max(-1.0, mono.samples[i]));
        const auto s = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
        w_u16(static_cast<std::uint16_t>(s));
    }
}

std::string file_content_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace gdiff
