#include "gdiff/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gdiff {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'D', 'M', '1'};

json config_to_json(const DenoiserConfig& c) {
    return json{{"hidden_dim", c.hidden_dim},
                {"num_blocks", c.num_blocks},
                {"num_heads", c.num_heads},
                {"frame_dim", c.frame_dim},
                {"audio_dim", c.audio_dim},
                {"num_frames", c.num_frames},
                {"num_init_frames", c.num_init_frames},
                {"prediction_mode", c.prediction_mode == PredictionMode::kNoise ? "noise" : "sample"}};
}

DenoiserConfig config_from_json(const json& j) {
    DenoiserConfig c;
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.frame_dim = j.at("frame_dim").get<int>();
    c.audio_dim = j.at("audio_dim").get<int>();
    c.num_frames = j.at("num_frames").get<int>();
    c.num_init_frames = j.at("num_init_frames").get<int>();
    const std::string mode = j.at("prediction_mode").get<std::string>();
    if (mode == "noise") {
        c.prediction_mode = PredictionMode::kNoise;
    } else if (mode == "sample") {
        c.prediction_mode = PredictionMode::kSample;
    } else {
        throw std::runtime_error("checkpoint: unknown prediction_mode '" + mode + "'");
    }
    return c;
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vector(std::ifstream& in, std::int64_t n) {
    Eigen::VectorXd v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
        throw std::runtime_error("checkpoint: truncated tensor data");
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const ParamLayout layout = build_param_layout(ckpt.config);
    if (ckpt.params.size() != layout.total) {
        throw std::invalid_argument("save_checkpoint: parameter vector does not match config layout");
    }

    json tensors = json::array();
    for (const auto& t : layout.tensors) {
        tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", t.offset}});
    }
    json header{{"format_version", kCheckpointFormatVersion},
                {"denoiser", config_to_json(ckpt.config)},
                {"schedule", {{"T", ckpt.schedule_timesteps},
                              {"beta_1", ckpt.schedule_beta_1},
                              {"beta_T", ckpt.schedule_beta_T}}},
                {"stats",
                 {{"mean", std::vector<double>(ckpt.stats.mean.data(),
                                               ckpt.stats.mean.data() + ckpt.stats.mean.size())},
                  {"std", std::vector<double>(ckpt.stats.stddev.data(),
                                              ckpt.stats.stddev.data() + ckpt.stats.stddev.size())}}},
                {"tensors", tensors},
                {"num_params", layout.total},
                {"step", ckpt.step},
                {"train_seed", ckpt.train_seed},
                {"has_optimizer", ckpt.optimizer.has_value()}};
    if (ckpt.optimizer) header["optimizer_updates"] = ckpt.optimizer->updates;

    const std::string header_str = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, 4);
    const std::uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_str.data(), static_cast<std::streamsize>(hlen));
    write_vector(out, ckpt.params);
    if (ckpt.optimizer) {
        write_vector(out, ckpt.optimizer->m);
        write_vector(out, ckpt.optimizer->v);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    const json header = json::parse(header_str);

    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    }

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("denoiser"));
    ckpt.schedule_timesteps = header.at("schedule").at("T").get<int>();
    ckpt.schedule_beta_1 = header.at("schedule").at("beta_1").get<double>();
    ckpt.schedule_beta_T = header.at("schedule").at("beta_T").get<double>();
    const auto mean = header.at("stats").at("mean").get<std::vector<double>>();
    const auto stddev = header.at("stats").at("std").get<std::vector<double>>();
    ckpt.stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<int>(mean.size()));
    ckpt.stats.stddev =
        Eigen::Map<const Eigen::VectorXd>(stddev.data(), static_cast<int>(stddev.size()));
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.train_seed = header.at("train_seed").get<std::uint64_t>();

    const auto num_params = header.at("num_params").get<std::int64_t>();
    const ParamLayout layout = build_param_layout(ckpt.config);
    if (layout.total != num_params) {
        throw std::runtime_error("checkpoint: tensor table does not match config layout");
    }
    ckpt.params = read_vector(in, num_params);
    if (header.at("has_optimizer").get<bool>()) {
        AdamState opt;
        opt.m = read_vector(in, num_params);
        opt.v = read_vector(in, num_params);
        opt.updates = header.at("optimizer_updates").get<std::int64_t>();
        ckpt.optimizer = std::move(opt);
    }
    return ckpt;
}

}  // namespace gdiff
