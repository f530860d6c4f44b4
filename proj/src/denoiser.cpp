#include "gdiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace gdiff {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Per-row layer norm. Returns the normalized rows scaled by gamma/beta and
// records (x - mu)/sigma plus 1/sigma for the backward pass.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gamma,
                           const Eigen::RowVectorXd& beta, Eigen::MatrixXd* xhat,
                           Eigen::VectorXd* inv_sigma) {
    const int rows = static_cast<int>(x.rows());
    const int cols = static_cast<int>(x.cols());
    xhat->resize(rows, cols);
    inv_sigma->resize(rows);
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        (*inv_sigma)[r] = inv;
        xhat->row(r) = (x.row(r).array() - mu) * inv;
        out.row(r) = xhat->row(r).cwiseProduct(gamma) + beta;
    }
    return out;
}

// Gradient through layer norm, given d(out), the recorded xhat and 1/sigma.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_sigma,
                                    const Eigen::RowVectorXd& gamma, Eigen::RowVectorXd* d_gamma,
                                    Eigen::RowVectorXd* d_beta) {
    const int rows = static_cast<int>(d_out.rows());
    const int cols = static_cast<int>(d_out.cols());
    Eigen::MatrixXd dx(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd g = d_out.row(r).cwiseProduct(gamma);
        const double mean_g = g.mean();
        const double mean_gx = g.cwiseProduct(xhat.row(r)).mean();
        dx.row(r) =
            inv_sigma[r] * (g.array() - mean_g - xhat.row(r).array() * mean_gx).matrix();
    }
    *d_gamma += d_out.cwiseProduct(xhat).colwise().sum();
    *d_beta += d_out.colwise().sum();
    return dx;
}

Eigen::VectorXd sinusoidal_embedding(double t, int dim) {
    Eigen::VectorXd e(dim);
    const int half = dim / 2;
    for (int j = 0; j < half; ++j) {
        const double denom = half > 1 ? static_cast<double>(half - 1) : 1.0;
        const double freq = std::exp(-std::log(1e4) * j / denom);
        e[2 * j] = std::sin(t * freq);
        e[2 * j + 1] = std::cos(t * freq);
    }
    if (dim % 2 == 1) e[dim - 1] = 0.0;
    return e;
}

}  // namespace

void DenoiserConfig::validate() const {
    if (hidden_dim <= 0 || num_blocks <= 0 || num_heads <= 0) {
        throw std::invalid_argument("denoiser config: dimensions must be positive");
    }
    if (hidden_dim % num_heads != 0) {
        throw std::invalid_argument("denoiser config: hidden_dim must be divisible by num_heads");
    }
    if (frame_dim <= 0 || audio_dim <= 0 || num_frames <= 0 || num_init_frames <= 0) {
        throw std::invalid_argument("denoiser config: token dimensions must be positive");
    }
}

const TensorSpec& ParamLayout::spec(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::out_of_range("no parameter tensor named " + name);
}

ParamLayout build_param_layout(const DenoiserConfig& cfg) {
    cfg.validate();
    const int h = cfg.hidden_dim;
    const int f = cfg.frame_dim;
    const int a = cfg.audio_dim;
    const int ff = cfg.ff_dim();
    const int tokens = cfg.tokens();

    ParamLayout layout;
    auto add = [&](const std::string& name, int rows, int cols) {
        TensorSpec s{name, rows, cols, layout.total};
        layout.total += s.size();
        layout.tensors.push_back(std::move(s));
    };

    add("time_mlp.w1", h, h);
    add("time_mlp.b1", 1, h);
    add("time_mlp.w2", h, h);
    add("time_mlp.b2", 1, h);
    add("init_proj.w", f, h);
    add("init_proj.b", 1, h);
    add("audio_proj.w", a, h);
    add("audio_proj.b", 1, h);
    add("frame_proj.w", f, h);
    add("frame_proj.b", 1, h);
    add("null_init", 1, h);
    add("null_audio", 1, h);
    add("pos_embed", tokens, h);
    for (int b = 0; b < cfg.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        add(p + "ln1.gamma", 1, h);
        add(p + "ln1.beta", 1, h);
        add(p + "attn.wq", h, h);
        add(p + "attn.bq", 1, h);
        add(p + "attn.wk", h, h);
        add(p + "attn.bk", 1, h);
        add(p + "attn.wv", h, h);
        add(p + "attn.bv", 1, h);
        add(p + "attn.wo", h, h);
        add(p + "attn.bo", 1, h);
        add(p + "ln2.gamma", 1, h);
        add(p + "ln2.beta", 1, h);
        add(p + "ff.w1", h, ff);
        add(p + "ff.b1", 1, ff);
        add(p + "ff.w2", ff, h);
        add(p + "ff.b2", 1, h);
    }
    add("final_ln.gamma", 1, h);
    add("final_ln.beta", 1, h);
    add("readout.w", h, f);
    add("readout.b", 1, f);
    return layout;
}

std::int64_t expected_parameter_count(const DenoiserConfig& cfg) {
    const std::int64_t h = cfg.hidden_dim;
    const std::int64_t f = cfg.frame_dim;
    const std::int64_t a = cfg.audio_dim;
    const std::int64_t tokens = cfg.tokens();
    const std::int64_t blocks = cfg.num_blocks;
    return 2 * (h * h + h)            // time MLP
           + 2 * (f * h + h)          // init + frame projections
           + (a * h + h)              // audio projection
           + 2 * h                    // null embeddings
           + tokens * h               // positional table
           + blocks * (12 * h * h + 13 * h)
           + 2 * h                    // final layer norm
           + (h * f + f);             // readout
}

Denoiser::Denoiser(const DenoiserConfig& cfg)
    : cfg_(cfg), tok_(TokenLayout::from_config(cfg)), layout_(build_param_layout(cfg)) {}

Eigen::Map<const Eigen::MatrixXd> Denoiser::view(const Eigen::VectorXd& params,
                                                 const std::string& name) const {
    const TensorSpec& s = layout_.spec(name);
    return {params.data() + s.offset, s.rows, s.cols};
}

namespace {

Eigen::Map<Eigen::MatrixXd> mut_view(Eigen::VectorXd& vec, const TensorSpec& s) {
    return {vec.data() + s.offset, s.rows, s.cols};
}

}  // namespace

Eigen::VectorXd Denoiser::init_params(std::uint64_t seed) const {
    Rng rng(seed);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(layout_.total);
    for (const auto& s : layout_.tensors) {
        auto m = mut_view(params, s);
        const bool is_weight = s.name.size() > 2 && (s.name.ends_with(".w") || s.name.ends_with(".w1") ||
                                                     s.name.ends_with(".w2") || s.name.ends_with("wq") ||
                                                     s.name.ends_with("wk") || s.name.ends_with("wv") ||
                                                     s.name.ends_with("wo"));
        if (s.name == "readout.w" || s.name == "readout.b") {
            continue;  // zero-initialized readout
        } else if (s.name.ends_with("gamma")) {
            m.setOnes();
        } else if (s.name.ends_with("beta") || s.name.ends_with(".b") || s.name.ends_with(".b1") ||
                   s.name.ends_with(".b2") || s.name.ends_with("bq") || s.name.ends_with("bk") ||
                   s.name.ends_with("bv") || s.name.ends_with("bo")) {
            continue;  // zero biases
        } else if (s.name == "pos_embed" || s.name == "null_init" || s.name == "null_audio") {
            for (int c = 0; c < s.cols; ++c)
                for (int r = 0; r < s.rows; ++r) m(r, c) = 0.02 * rng.gaussian();
        } else if (is_weight) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(s.rows));
            for (int c = 0; c < s.cols; ++c)
                for (int r = 0; r < s.rows; ++r) m(r, c) = scale * rng.gaussian();
        } else {
            throw std::logic_error("unhandled parameter tensor " + s.name);
        }
    }
    return params;
}

Eigen::MatrixXd Denoiser::forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x_t, int t,
                                  const ConditioningContext& ctx) const {
    DenoiserTape tape;
    return forward_tape(params, x_t, t, ctx, &tape);
}

Eigen::MatrixXd Denoiser::forward_tape(const Eigen::VectorXd& params, const Eigen::MatrixXd& x_t,
                                       int t, const ConditioningContext& ctx,
                                       DenoiserTape* tape) const {
    const int h = cfg_.hidden_dim;
    const int n = cfg_.num_frames;
    const int m = cfg_.num_init_frames;
    const int total = tok_.total;
    if (x_t.rows() != n || x_t.cols() != cfg_.frame_dim) {
        throw std::invalid_argument("denoiser forward: noisy input must be N x frame_dim");
    }
    if (!ctx.is_null) {
        if (ctx.init_frames.rows() != m || ctx.init_frames.cols() != cfg_.frame_dim) {
            throw std::invalid_argument("denoiser forward: init frames must be M x frame_dim");
        }
        if (ctx.audio.rows() != n || ctx.audio.cols() != cfg_.audio_dim) {
            throw std::invalid_argument("denoiser forward: audio must be N x audio_dim");
        }
    }

    tape->t = t;
    tape->is_null = ctx.is_null;
    tape->x_t = x_t;
    if (!ctx.is_null) {
        tape->init_in = ctx.init_frames;
        tape->audio_in = ctx.audio;
    }

    // Time token: sinusoidal ladder -> 2-layer MLP.
    tape->sin_embed = sinusoidal_embedding(static_cast<double>(t), h);
    const auto tw1 = view(params, "time_mlp.w1");
    const auto tb1 = view(params, "time_mlp.b1");
    const auto tw2 = view(params, "time_mlp.w2");
    const auto tb2 = view(params, "time_mlp.b2");
    tape->time_pre = tw1.transpose() * tape->sin_embed + tb1.transpose();
    tape->time_act = tape->time_pre.unaryExpr([](double v) { return gelu(v); });
    const Eigen::VectorXd time_token = tw2.transpose() * tape->time_act + tb2.transpose();

    // Token matrix.
    Eigen::MatrixXd tokens(total, h);
    tokens.row(tok_.time_offset) = time_token.transpose();
    if (ctx.is_null) {
        const auto null_init = view(params, "null_init");
        const auto null_audio = view(params, "null_audio");
        tokens.middleRows(tok_.init_offset, m) = null_init.replicate(m, 1);
        tokens.middleRows(tok_.audio_offset, n) = null_audio.replicate(n, 1);
    } else {
        const auto iw = view(params, "init_proj.w");
        const auto ib = view(params, "init_proj.b");
        const auto aw = view(params, "audio_proj.w");
        const auto ab = view(params, "audio_proj.b");
        tokens.middleRows(tok_.init_offset, m) =
            (ctx.init_frames * iw).rowwise() + ib.row(0);
        tokens.middleRows(tok_.audio_offset, n) = (ctx.audio * aw).rowwise() + ab.row(0);
    }
    const auto fw = view(params, "frame_proj.w");
    const auto fb = view(params, "frame_proj.b");
    tokens.middleRows(tok_.frame_offset, n) = (x_t * fw).rowwise() + fb.row(0);
    tokens += view(params, "pos_embed");

    // Transformer blocks (pre-norm).
    const int heads = cfg_.num_heads;
    const int head_dim = h / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    tape->blocks.resize(cfg_.num_blocks);
    Eigen::MatrixXd x = std::move(tokens);
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        auto& bt = tape->blocks[b];
        const std::string p = "block" + std::to_string(b) + ".";
        bt.x_in = x;

        const Eigen::RowVectorXd g1 = view(params, p + "ln1.gamma").row(0);
        const Eigen::RowVectorXd be1 = view(params, p + "ln1.beta").row(0);
        const Eigen::MatrixXd z = layer_norm(x, g1, be1, &bt.ln1_xhat, &bt.ln1_inv_sigma);

        bt.q = (z * view(params, p + "attn.wq")).rowwise() + view(params, p + "attn.bq").row(0);
        bt.k = (z * view(params, p + "attn.wk")).rowwise() + view(params, p + "attn.bk").row(0);
        bt.v = (z * view(params, p + "attn.wv")).rowwise() + view(params, p + "attn.bv").row(0);

        bt.probs.resize(heads);
        bt.attn_concat.resize(total, h);
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = bt.q.middleCols(hd * head_dim, head_dim);
            const auto kh = bt.k.middleCols(hd * head_dim, head_dim);
            const auto vh = bt.v.middleCols(hd * head_dim, head_dim);
            Eigen::MatrixXd scores = scale * (qh * kh.transpose());
            for (int r = 0; r < total; ++r) {
                const double mx = scores.row(r).maxCoeff();
                Eigen::RowVectorXd e = (scores.row(r).array() - mx).exp();
                scores.row(r) = e / e.sum();
            }
            bt.probs[hd] = std::move(scores);
            bt.attn_concat.middleCols(hd * head_dim, head_dim) = bt.probs[hd] * vh;
        }
        const Eigen::MatrixXd attn_out =
            (bt.attn_concat * view(params, p + "attn.wo")).rowwise() +
            view(params, p + "attn.bo").row(0);
        bt.y = x + attn_out;

        const Eigen::RowVectorXd g2 = view(params, p + "ln2.gamma").row(0);
        const Eigen::RowVectorXd be2 = view(params, p + "ln2.beta").row(0);
        const Eigen::MatrixXd z2 = layer_norm(bt.y, g2, be2, &bt.ln2_xhat, &bt.ln2_inv_sigma);

        bt.ff_pre = (z2 * view(params, p + "ff.w1")).rowwise() + view(params, p + "ff.b1").row(0);
        bt.ff_act = bt.ff_pre.unaryExpr([](double v) { return gelu(v); });
        x = bt.y + ((bt.ff_act * view(params, p + "ff.w2")).rowwise() +
                    view(params, p + "ff.b2").row(0));
    }

    tape->final_in = x;
    const Eigen::RowVectorXd gf = view(params, "final_ln.gamma").row(0);
    const Eigen::RowVectorXd bf = view(params, "final_ln.beta").row(0);
    tape->final_out = layer_norm(x, gf, bf, &tape->final_xhat, &tape->final_inv_sigma);

    return (tape->final_out.bottomRows(n) * view(params, "readout.w")).rowwise() +
           view(params, "readout.b").row(0);
}

void Denoiser::backward(const Eigen::VectorXd& params, const DenoiserTape& tape,
                        const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const {
    const int h = cfg_.hidden_dim;
    const int n = cfg_.num_frames;
    const int m = cfg_.num_init_frames;
    const int total = tok_.total;
    const int heads = cfg_.num_heads;
    const int head_dim = h / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    if (grad.size() != layout_.total) {
        throw std::invalid_argument("denoiser backward: gradient buffer has wrong size");
    }

    auto g = [&](const std::string& name) { return mut_view(grad, layout_.spec(name)); };

    // Readout.
    {
        auto d_w = g("readout.w");
        auto d_b = g("readout.b");
        d_w += tape.final_out.bottomRows(n).transpose() * d_out;
        d_b.row(0) += d_out.colwise().sum();
    }
    Eigen::MatrixXd d_final_out = Eigen::MatrixXd::Zero(total, h);
    d_final_out.bottomRows(n) = d_out * view(params, "readout.w").transpose();

    // Final layer norm.
    Eigen::MatrixXd d_x;
    {
        Eigen::RowVectorXd d_gamma = Eigen::RowVectorXd::Zero(h);
        Eigen::RowVectorXd d_beta = Eigen::RowVectorXd::Zero(h);
        d_x = layer_norm_backward(d_final_out, tape.final_xhat, tape.final_inv_sigma,
                                  view(params, "final_ln.gamma").row(0), &d_gamma, &d_beta);
        g("final_ln.gamma").row(0) += d_gamma;
        g("final_ln.beta").row(0) += d_beta;
    }

    // Blocks in reverse.
    for (int b = cfg_.num_blocks - 1; b >= 0; --b) {
        const auto& bt = tape.blocks[b];
        const std::string p = "block" + std::to_string(b) + ".";

        // x_out = y + ff(ln2(y))
        const Eigen::MatrixXd& d_x_out = d_x;
        Eigen::MatrixXd d_ff_act = d_x_out * view(params, p + "ff.w2").transpose();
        {
            auto d_w2 = g(p + "ff.w2");
            auto d_b2 = g(p + "ff.b2");
            d_w2 += bt.ff_act.transpose() * d_x_out;
            d_b2.row(0) += d_x_out.colwise().sum();
        }
        const Eigen::MatrixXd d_ff_pre =
            d_ff_act.cwiseProduct(bt.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }));
        const Eigen::RowVectorXd g2 = view(params, p + "ln2.gamma").row(0);
        const Eigen::RowVectorXd be2 = view(params, p + "ln2.beta").row(0);
        // ln2 output is cheap to rebuild from the recorded xhat.
        const Eigen::MatrixXd ln2_out =
            (bt.ln2_xhat.array().rowwise() * g2.array()).matrix().rowwise() + be2;
        {
            auto d_w1 = g(p + "ff.w1");
            auto d_b1 = g(p + "ff.b1");
            d_w1 += ln2_out.transpose() * d_ff_pre;
            d_b1.row(0) += d_ff_pre.colwise().sum();
        }
        Eigen::MatrixXd d_ln2_out = d_ff_pre * view(params, p + "ff.w1").transpose();
        Eigen::MatrixXd d_y;
        {
            Eigen::RowVectorXd d_gamma = Eigen::RowVectorXd::Zero(h);
            Eigen::RowVectorXd d_beta = Eigen::RowVectorXd::Zero(h);
            d_y = layer_norm_backward(d_ln2_out, bt.ln2_xhat, bt.ln2_inv_sigma, g2, &d_gamma,
                                      &d_beta);
            g(p + "ln2.gamma").row(0) += d_gamma;
            g(p + "ln2.beta").row(0) += d_beta;
        }
        d_y += d_x_out;  // residual

        // y = x_in + attn(ln1(x_in))
        Eigen::MatrixXd d_concat = d_y * view(params, p + "attn.wo").transpose();
        {
            auto d_wo = g(p + "attn.wo");
            auto d_bo = g(p + "attn.bo");
            d_wo += bt.attn_concat.transpose() * d_y;
            d_bo.row(0) += d_y.colwise().sum();
        }
        Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(total, h);
        Eigen::MatrixXd d_k = Eigen::MatrixXd::Zero(total, h);
        Eigen::MatrixXd d_v = Eigen::MatrixXd::Zero(total, h);
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = bt.q.middleCols(hd * head_dim, head_dim);
            const auto kh = bt.k.middleCols(hd * head_dim, head_dim);
            const auto vh = bt.v.middleCols(hd * head_dim, head_dim);
            const auto d_oh = d_concat.middleCols(hd * head_dim, head_dim);
            const Eigen::MatrixXd& probs = bt.probs[hd];

            d_v.middleCols(hd * head_dim, head_dim) = probs.transpose() * d_oh;
            Eigen::MatrixXd d_probs = d_oh * vh.transpose();
            // softmax backward, row-wise
            Eigen::MatrixXd d_scores(total, total);
            for (int r = 0; r < total; ++r) {
                const double dot = d_probs.row(r).dot(probs.row(r));
                d_scores.row(r) =
                    (probs.row(r).array() * (d_probs.row(r).array() - dot)).matrix();
            }
            d_q.middleCols(hd * head_dim, head_dim) = scale * (d_scores * kh);
            d_k.middleCols(hd * head_dim, head_dim) = scale * (d_scores.transpose() * qh);
        }
        const Eigen::RowVectorXd g1 = view(params, p + "ln1.gamma").row(0);
        const Eigen::RowVectorXd be1 = view(params, p + "ln1.beta").row(0);
        const Eigen::MatrixXd ln1_out =
            (bt.ln1_xhat.array().rowwise() * g1.array()).matrix().rowwise() + be1;
        {
            auto d_wq = g(p + "attn.wq");
            auto d_bq = g(p + "attn.bq");
            auto d_wk = g(p + "attn.wk");
            auto d_bk = g(p + "attn.bk");
            auto d_wv = g(p + "attn.wv");
            auto d_bv = g(p + "attn.bv");
            d_wq += ln1_out.transpose() * d_q;
            d_bq.row(0) += d_q.colwise().sum();
            d_wk += ln1_out.transpose() * d_k;
            d_bk.row(0) += d_k.colwise().sum();
            d_wv += ln1_out.transpose() * d_v;
            d_bv.row(0) += d_v.colwise().sum();
        }
        Eigen::MatrixXd d_ln1_out = d_q * view(params, p + "attn.wq").transpose() +
                                    d_k * view(params, p + "attn.wk").transpose() +
                                    d_v * view(params, p + "attn.wv").transpose();
        Eigen::MatrixXd d_x_in;
        {
            Eigen::RowVectorXd d_gamma = Eigen::RowVectorXd::Zero(h);
            Eigen::RowVectorXd d_beta = Eigen::RowVectorXd::Zero(h);
            d_x_in = layer_norm_backward(d_ln1_out, bt.ln1_xhat, bt.ln1_inv_sigma, g1, &d_gamma,
                                         &d_beta);
            g(p + "ln1.gamma").row(0) += d_gamma;
            g(p + "ln1.beta").row(0) += d_beta;
        }
        d_x = d_x_in + d_y;  // residual
    }

    // Token assembly.
    g("pos_embed") += d_x;

    const Eigen::VectorXd d_time_token = d_x.row(tok_.time_offset).transpose();
    {
        // time token = w2^T act + b2
        auto d_w2 = g("time_mlp.w2");
        auto d_b2 = g("time_mlp.b2");
        d_w2 += tape.time_act * d_time_token.transpose();
        d_b2.row(0) += d_time_token.transpose();
        const Eigen::VectorXd d_act = view(params, "time_mlp.w2") * d_time_token;
        const Eigen::VectorXd d_pre = d_act.cwiseProduct(
            tape.time_pre.unaryExpr([](double v) { return gelu_grad(v); }));
        auto d_w1 = g("time_mlp.w1");
        auto d_b1 = g("time_mlp.b1");
        d_w1 += tape.sin_embed * d_pre.transpose();
        d_b1.row(0) += d_pre.transpose();
    }

    const auto d_init_rows = d_x.middleRows(tok_.init_offset, m);
    const auto d_audio_rows = d_x.middleRows(tok_.audio_offset, n);
    if (tape.is_null) {
        g("null_init").row(0) += d_init_rows.colwise().sum();
        g("null_audio").row(0) += d_audio_rows.colwise().sum();
    } else {
        g("init_proj.w") += tape.init_in.transpose() * d_init_rows;
        g("init_proj.b").row(0) += d_init_rows.colwise().sum();
        g("audio_proj.w") += tape.audio_in.transpose() * d_audio_rows;
        g("audio_proj.b").row(0) += d_audio_rows.colwise().sum();
    }
    const auto d_frame_rows = d_x.middleRows(tok_.frame_offset, n);
    g("frame_proj.w") += tape.x_t.transpose() * d_frame_rows;
    g("frame_proj.b").row(0) += d_frame_rows.colwise().sum();
}

DenoiseFn Denoiser::bind(const Eigen::VectorXd& params) const {
    return [this, params](const Eigen::MatrixXd& x_t, int t, const ConditioningContext& ctx) {
        return forward(params, x_t, t, ctx);
    };
}

}  // namespace gdiff
