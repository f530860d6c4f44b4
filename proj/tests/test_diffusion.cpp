#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "gdiff/diffusion.hpp"
#include "gdiff/rng.hpp"

using namespace gdiff;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    return Eigen::MatrixXd::NullaryExpr(rows, cols, [&](Eigen::Index) { return rng.gaussian(); });
}

}  // namespace

TEST_CASE("make_schedule forced values") {
    const DiffusionSchedule s = make_schedule(500, 1e-4, 0.02);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.betas[0] == doctest::Approx(1e-4));
    CHECK(s.betas[499] == doctest::Approx(0.02));

    const DiffusionSchedule tiny = make_schedule(2, 0.1, 0.2);
    CHECK(tiny.alpha_bar(1) == doctest::Approx(0.9));
    CHECK(tiny.alpha_bar(2) == doctest::Approx(0.72));
}

TEST_CASE("schedule matches the direct-product oracle") {
    const DiffusionSchedule s = make_schedule(500, 1e-4, 0.02);
    // Independent direct product.
    double prod = 1.0;
    for (int t = 1; t <= 500; ++t) {
        const double beta = 1e-4 + (0.02 - 1e-4) * (t - 1) / 499.0;
        prod *= 1.0 - beta;
    }
    CHECK(s.alpha_bar(500) == doctest::Approx(prod).epsilon(1e-12));
    CHECK(std::abs(s.alpha_bar(500) - 6.4e-3) / 6.4e-3 < 0.05);
}

TEST_CASE("schedule invariants") {
    const DiffusionSchedule s = make_schedule(100, 1e-4, 0.05);
    for (int t = 1; t <= 100; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        CHECK(s.alpha(t) == doctest::Approx(1.0 - s.beta(t)));
        if (t > 1) {
            CHECK(s.beta(t) > s.beta(t - 1));
            CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
            CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-15));
        }
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) < 1.0);
    }
    CHECK_THROWS(make_schedule(1, 1e-4, 0.02));
    CHECK_THROWS(make_schedule(10, 0.0, 0.02));
    CHECK_THROWS(make_schedule(10, 0.5, 0.2));
    CHECK_THROWS(make_schedule(10, 0.1, 1.0));
}

TEST_CASE("q_sample endpoint cases") {
    const DiffusionSchedule s = make_schedule(500, 1e-4, 0.02);
    const Eigen::MatrixXd x0 = random_matrix(4, 6, 1);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 6);

    const Eigen::MatrixXd no_noise = q_sample(x0, 10, zero, s);
    CHECK(no_noise.isApprox(std::sqrt(s.alpha_bar(10)) * x0, 1e-12));

    const Eigen::MatrixXd eps = random_matrix(4, 6, 2);
    const Eigen::MatrixXd no_signal = q_sample(zero, 10, eps, s);
    CHECK(no_signal.isApprox(std::sqrt(1.0 - s.alpha_bar(10)) * eps, 1e-12));

    // At t = T the signal is attenuated to about 8% of its norm.
    Eigen::MatrixXd unit = x0 / x0.norm();
    const Eigen::MatrixXd at_T = q_sample(unit, 500, zero, s);
    CHECK(at_T.norm() == doctest::Approx(0.080).epsilon(0.01));

    CHECK_THROWS(q_sample(x0, 0, eps, s));
    CHECK_THROWS(q_sample(x0, 501, eps, s));
    CHECK_THROWS(q_sample(x0, 5, random_matrix(3, 6, 3), s));
}

TEST_CASE("q_sample satisfies the mean/variance law over many draws") {
    const DiffusionSchedule s = make_schedule(50, 1e-4, 0.02);
    const int t = 30;
    const Eigen::MatrixXd x0 = random_matrix(2, 3, 4);
    Rng rng(99);
    const int draws = 10000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 3);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(2, 3);
    for (int i = 0; i < draws; ++i) {
        const Eigen::MatrixXd eps =
            Eigen::MatrixXd::NullaryExpr(2, 3, [&](Eigen::Index) { return rng.gaussian(); });
        const Eigen::MatrixXd xt = q_sample(x0, t, eps, s);
        sum += xt;
        sumsq += xt.cwiseProduct(xt);
    }
    const Eigen::MatrixXd mean = sum / draws;
    const Eigen::MatrixXd var = sumsq / draws - mean.cwiseProduct(mean);
    const double expected_var = 1.0 - s.alpha_bar(t);
    // 3 sigma statistical tolerance.
    const double mean_tol = 3.0 * std::sqrt(expected_var / draws);
    const double var_tol = 3.0 * expected_var * std::sqrt(2.0 / draws);
    CHECK((mean - std::sqrt(s.alpha_bar(t)) * x0).cwiseAbs().maxCoeff() < mean_tol);
    CHECK((var.array() - expected_var).abs().maxCoeff() < var_tol);
}

TEST_CASE("losses: identity, forced offset, scalar-loop oracle") {
    const Eigen::MatrixXd a = random_matrix(5, 7, 10);
    CHECK(noise_loss(a, a) == 0.0);
    CHECK(sample_loss(a, a) == 0.0);

    const Eigen::MatrixXd b = a.array() + 1.0;
    CHECK(noise_loss(b, a) == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::MatrixXd c = a.array() + 0.5;
    CHECK(sample_loss(c, a) == doctest::Approx(0.25).epsilon(1e-12));

    const Eigen::MatrixXd x = random_matrix(5, 7, 11);
    double oracle = 0.0;
    for (int r = 0; r < 5; ++r)
        for (int col = 0; col < 7; ++col) oracle += (a(r, col) - x(r, col)) * (a(r, col) - x(r, col));
    oracle /= 35.0;
    CHECK(noise_loss(a, x) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(sample_loss(a, x) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK_THROWS(noise_loss(a, random_matrix(5, 6, 12)));
}

TEST_CASE("guided_noise endpoints are exact and it is affine in s") {
    const Eigen::MatrixXd cond = random_matrix(3, 4, 20);
    const Eigen::MatrixXd uncond = random_matrix(3, 4, 21);

    const Eigen::MatrixXd at0 = guided_noise(cond, uncond, 0.0);
    for (int i = 0; i < at0.size(); ++i) CHECK(at0.data()[i] == uncond.data()[i]);
    const Eigen::MatrixXd at1 = guided_noise(cond, uncond, 1.0);
    for (int i = 0; i < at1.size(); ++i) CHECK(at1.data()[i] == cond.data()[i]);

    // Paper operating point s = 0.2 on scalar endpoints.
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    CHECK(guided_noise(one, zero, 0.2)(0, 0) == doctest::Approx(0.2).epsilon(1e-15));

    // Affine: g(s1) + g(s2) = 2 g((s1+s2)/2)
    const Eigen::MatrixXd g1 = guided_noise(cond, uncond, 0.3);
    const Eigen::MatrixXd g2 = guided_noise(cond, uncond, 1.7);
    const Eigen::MatrixXd gm = guided_noise(cond, uncond, 1.0);
    CHECK((g1 + g2 - 2.0 * gm).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("p_sample_step boundary rules") {
    const DiffusionSchedule s = make_schedule(50, 1e-4, 0.02);
    const Eigen::MatrixXd x = random_matrix(3, 4, 30);
    const Eigen::MatrixXd eps = random_matrix(3, 4, 31);
    const Eigen::MatrixXd big_noise = 100.0 * Eigen::MatrixXd::Ones(3, 4);

    // t = 1: no noise regardless of the noise argument.
    const Eigen::MatrixXd a = p_sample_step(x, 1, eps, s, big_noise);
    const Eigen::MatrixXd b = p_sample_step(x, 1, eps, s, Eigen::MatrixXd::Zero(3, 4));
    CHECK(a.isApprox(b, 1e-15));

    // Degenerate beta: the step is nearly the identity.
    const DiffusionSchedule tiny = make_schedule(10, 1e-12, 2e-12);
    const Eigen::MatrixXd c = p_sample_step(x, 5, eps, tiny, Eigen::MatrixXd::Zero(3, 4));
    CHECK((c - x).cwiseAbs().maxCoeff() < 1e-6);

    CHECK_THROWS(p_sample_step(x, 0, eps, s, big_noise));
    CHECK_THROWS(p_sample_step(x, 51, eps, s, big_noise));
}

TEST_CASE("deterministic reverse pass with the exact-eps oracle recovers x0") {
    // Oracle: knows x0 and inverts the closed form at the current x_t.
    const DiffusionSchedule s = make_schedule(50, 1e-4, 0.02);
    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd x0 = random_matrix(8, 10, 100 + trial);
        const Eigen::MatrixXd eps = random_matrix(8, 10, 200 + trial);
        Eigen::MatrixXd x = q_sample(x0, 50, eps, s);
        double prev_dist = std::numeric_limits<double>::infinity();
        for (int t = 50; t >= 1; --t) {
            const Eigen::MatrixXd eps_oracle =
                (x - std::sqrt(s.alpha_bar(t)) * x0) / std::sqrt(1.0 - s.alpha_bar(t));
            x = p_sample_step(x, t, eps_oracle, s, Eigen::MatrixXd::Zero(8, 10));
            // Distance to the scaled clean signal shrinks monotonically.
            const double dist =
                t > 1 ? (x - std::sqrt(s.alpha_bar(t - 1)) * x0).norm() : (x - x0).norm();
            CHECK(dist <= prev_dist + 1e-12);
            prev_dist = dist;
        }
        worst = std::max(worst, std::sqrt((x - x0).squaredNorm() / x0.size()));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("sample is deterministic under a fixed seed") {
    const DiffusionSchedule s = make_schedule(20, 1e-4, 0.02);
    const DenoiseFn stub = [](const Eigen::MatrixXd& x, int, const ConditioningContext&) {
        return (0.1 * x).eval();
    };
    SampleOptions opts;
    const Eigen::MatrixXd a = sample(stub, ConditioningContext::null_context(), 4, 6, s, opts, 42);
    const Eigen::MatrixXd b = sample(stub, ConditioningContext::null_context(), 4, 6, s, opts, 42);
    for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    const Eigen::MatrixXd c = sample(stub, ConditioningContext::null_context(), 4, 6, s, opts, 43);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sample with the identity oracle reaches the target") {
    const DiffusionSchedule s = make_schedule(50, 1e-4, 0.02);
    const Eigen::MatrixXd target = random_matrix(6, 8, 55);
    const DenoiseFn oracle = [&](const Eigen::MatrixXd& x, int t, const ConditioningContext&) {
        return ((x - std::sqrt(s.alpha_bar(t)) * target) / std::sqrt(1.0 - s.alpha_bar(t))).eval();
    };
    SampleOptions opts;
    opts.guidance_s = 0.2;
    const Eigen::MatrixXd out = sample(oracle, ConditioningContext::null_context(), 6, 8, s, opts, 7);
    // Noise injected along the way keeps this loose; the oracle pulls back
    // to the target manifold each step.
    CHECK(std::sqrt((out - target).squaredNorm() / target.size()) < 1e-3);
}

TEST_CASE("guidance endpoints ignore the other branch bitwise") {
    const DiffusionSchedule s = make_schedule(10, 1e-4, 0.02);
    int call_counter = 0;
    // Conditional branch returns garbage that changes every call.
    const DenoiseFn model = [&](const Eigen::MatrixXd& x, int, const ConditioningContext& ctx) {
        if (!ctx.is_null) {
            ++call_counter;
            return Eigen::MatrixXd::Constant(x.rows(), x.cols(), 1e30 * call_counter).eval();
        }
        return (0.05 * x).eval();
    };
    SampleOptions opts;
    opts.guidance_s = 0.0;
    ConditioningContext real_ctx;
    real_ctx.init_frames = Eigen::MatrixXd::Zero(2, 4);
    real_ctx.audio = Eigen::MatrixXd::Zero(3, 32);
    const Eigen::MatrixXd a = sample(model, real_ctx, 3, 4, s, opts, 1);
    const Eigen::MatrixXd b = sample(model, real_ctx, 3, 4, s, opts, 1);
    CHECK(call_counter == 2 * 10);  // conditional branch still evaluated each step
    for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

    // s = 1: unconditional garbage is ignored.
    int uncond_counter = 0;
    const DenoiseFn model2 = [&](const Eigen::MatrixXd& x, int, const ConditioningContext& ctx) {
        if (ctx.is_null) {
            ++uncond_counter;
            return Eigen::MatrixXd::Constant(x.rows(), x.cols(),
                                             std::nan("") * (uncond_counter + 1))
                .eval();
        }
        return (0.05 * x).eval();
    };
    opts.guidance_s = 1.0;
    ConditioningContext ctx;
    ctx.init_frames = Eigen::MatrixXd::Zero(2, 4);
    ctx.audio = Eigen::MatrixXd::Zero(3, 32);
    const Eigen::MatrixXd c = sample(model2, ctx, 3, 4, s, opts, 2);
    const Eigen::MatrixXd d = sample(model2, ctx, 3, 4, s, opts, 2);
    CHECK(c.allFinite());
    for (int i = 0; i < c.size(); ++i) CHECK(c.data()[i] == d.data()[i]);
}

TEST_CASE("sample-prediction mode converts x_hat to eps_hat via the identity") {
    const DiffusionSchedule s = make_schedule(50, 1e-4, 0.02);
    // Algebraic identity: eps == (q_sample(x0,t,eps) - sqrt(abar) x0)/sqrt(1-abar)
    for (int t : {1, 7, 25, 50}) {
        const Eigen::MatrixXd x0 = random_matrix(4, 5, 300 + t);
        const Eigen::MatrixXd eps = random_matrix(4, 5, 400 + t);
        const Eigen::MatrixXd xt = q_sample(x0, t, eps, s);
        const Eigen::MatrixXd back =
            (xt - std::sqrt(s.alpha_bar(t)) * x0) / std::sqrt(1.0 - s.alpha_bar(t));
        CHECK((back - eps).cwiseAbs().maxCoeff() < 1e-6);
    }

    // A sample-mode oracle that always returns x0 drives the sampler to x0.
    const Eigen::MatrixXd target = random_matrix(6, 8, 500);
    const DenoiseFn oracle = [&](const Eigen::MatrixXd&, int, const ConditioningContext&) {
        return target;
    };
    SampleOptions opts;
    opts.mode = PredictionMode::kSample;
    opts.guidance_s = 0.2;
    const Eigen::MatrixXd out = sample(oracle, ConditioningContext::null_context(), 6, 8, s, opts, 9);
    CHECK(std::sqrt((out - target).squaredNorm() / target.size()) < 1e-3);
}

TEST_CASE("schedule json round trip") {
    const auto path = std::filesystem::temp_directory_path() / "gdiff_schedule.json";
    const DiffusionSchedule s = make_schedule(100, 2e-4, 0.015);
    write_schedule_json(path, s, 2e-4, 0.015);
    const DiffusionSchedule back = read_schedule_json(path);
    CHECK(back.timesteps == 100);
    CHECK((back.betas - s.betas).cwiseAbs().maxCoeff() < 1e-15);
    std::filesystem::remove(path);
}
