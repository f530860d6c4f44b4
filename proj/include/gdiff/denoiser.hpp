// denoiser.hpp
// Transformer noise predictor. Conditioning (time embedding, initial
// keypoint frames, audio features) is concatenated with the noisy frames
// along the token axis; the readout covers the last N tokens. Forward and
// backward passes are written out explicitly so training has no external
// autodiff dependency and gradients can be checked against finite
// differences.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gdiff/diffusion.hpp"
#include "gdiff/rng.hpp"

namespace gdiff {

struct DenoiserConfig {
    int hidden_dim = 256;
    int num_blocks = 8;
    int num_heads = 8;
    int frame_dim = 100;  // 2K
    int audio_dim = 32;
    int num_frames = 34;  // N
    int num_init_frames = 4;  // M
    PredictionMode prediction_mode = PredictionMode::kNoise;

    int tokens() const { return 1 + num_init_frames + 2 * num_frames; }
    int ff_dim() const { return 4 * hidden_dim; }
    void validate() const;
};

// Token order along the sequence axis.
struct TokenLayout {
    int time_offset = 0;
    int init_offset = 1;
    int audio_offset = 0;
    int frame_offset = 0;
    int total = 0;

    static TokenLayout from_config(const DenoiserConfig& cfg) {
        TokenLayout l;
        l.time_offset = 0;
        l.init_offset = 1;
        l.audio_offset = 1 + cfg.num_init_frames;
        l.frame_offset = 1 + cfg.num_init_frames + cfg.num_frames;
        l.total = cfg.tokens();
        return l;
    }
};

struct TensorSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::int64_t offset = 0;
    std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
};

// All parameters live in one flat vector; named tensors are column-major
// views into it. The layout is a pure function of the config.
struct ParamLayout {
    std::vector<TensorSpec> tensors;
    std::int64_t total = 0;

    const TensorSpec& spec(const std::string& name) const;
};

ParamLayout build_param_layout(const DenoiserConfig& cfg);

// Closed-form parameter count; must equal build_param_layout(cfg).total.
//   time MLP            2 (H^2 + H)
//   init/frame proj     2 (F H + H)
//   audio proj          A H + H
//   null embeddings     2 H
//   positional table    L H          with L = 2N + M + 1
//   per block           12 H^2 + 13 H   (two layer norms, QKVO, 4x FF)
//   final layer norm    2 H
//   readout             H F + F
std::int64_t expected_parameter_count(const DenoiserConfig& cfg);

class Denoiser;

// Intermediates recorded by the forward pass for the backward pass.
struct DenoiserTape {
    struct Block {
        Eigen::MatrixXd x_in;
        Eigen::MatrixXd ln1_xhat;
        Eigen::VectorXd ln1_inv_sigma;
        Eigen::MatrixXd q, k, v;
        std::vector<Eigen::MatrixXd> probs;  // per head, L x L
        Eigen::MatrixXd attn_concat;
        Eigen::MatrixXd y;  // after attention residual
        Eigen::MatrixXd ln2_xhat;
        Eigen::VectorXd ln2_inv_sigma;
        Eigen::MatrixXd ff_pre;
        Eigen::MatrixXd ff_act;
    };
    int t = 0;
    bool is_null = false;
    Eigen::VectorXd sin_embed;
    Eigen::VectorXd time_pre;  // pre-GELU hidden of the time MLP
    Eigen::VectorXd time_act;
    Eigen::MatrixXd x_t;
    Eigen::MatrixXd init_in;
    Eigen::MatrixXd audio_in;
    std::vector<Block> blocks;
    Eigen::MatrixXd final_in;
    Eigen::MatrixXd final_xhat;
    Eigen::VectorXd final_inv_sigma;
    Eigen::MatrixXd final_out;
};

class Denoiser {
public:
    explicit Denoiser(const DenoiserConfig& cfg);

    const DenoiserConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }

    // Seeded initialization: scaled-Gaussian weights, zero biases, unit
    // layer-norm gains, zeroed readout.
    Eigen::VectorXd init_params(std::uint64_t seed) const;

    Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x_t, int t,
                            const ConditioningContext& ctx) const;

    Eigen::MatrixXd forward_tape(const Eigen::VectorXd& params, const Eigen::MatrixXd& x_t, int t,
                                 const ConditioningContext& ctx, DenoiserTape* tape) const;

    // Accumulates parameter gradients into `grad` (same length as params)
    // given the gradient of the loss w.r.t. the forward output.
    void backward(const Eigen::VectorXd& params, const DenoiserTape& tape,
                  const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const;

    // Bound DenoiseFn for the sampler.
    DenoiseFn bind(const Eigen::VectorXd& params) const;

    Eigen::Map<const Eigen::MatrixXd> view(const Eigen::VectorXd& params,
                                           const std::string& name) const;

private:
    DenoiserConfig cfg_;
    TokenLayout tok_;
    ParamLayout layout_;
};

}  // namespace gdiff
