#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "texmill/telemetry.hpp"

using namespace texmill::telemetry;

namespace {

RunLog make_log(const std::vector<std::int64_t>& steps, const std::vector<double>& train,
                const std::vector<std::optional<double>>& eval = {},
                const std::vector<std::optional<double>>& grad = {}) {
    RunLog log;
    log.steps = steps;
    log.train_loss = train;
    log.eval_loss = eval.empty() ? std::vector<std::optional<double>>(steps.size()) : eval;
    log.grad_norm = grad.empty() ? std::vector<std::optional<double>>(steps.size()) : grad;
    log.learning_rate.assign(steps.size(), std::nullopt);
    return log;
}

}  // namespace

TEST_CASE("parse well-formed log") {
    std::istringstream in("step,train_loss,eval_loss,grad_norm\n"
                          "0,4.0,,2.5\n"
                          "10,3.5,3.6,0.8\n"
                          "20,3.2,,0.7\n");
    auto log = parse_run_log(in);
    REQUIRE(log.steps.size() == 3);
    CHECK(log.steps == std::vector<std::int64_t>{0, 10, 20});
    CHECK(log.train_loss[1] == doctest::Approx(3.5));
    CHECK(!log.eval_loss[0].has_value());
    CHECK(log.eval_loss[1].has_value());
    CHECK(log.quarantined == 0);
}

TEST_CASE("parse sorts rows and keeps last duplicate") {
    std::istringstream in("step,train_loss\n20,3.0\n0,4.0\n10,3.5\n10,3.4\n");
    auto log = parse_run_log(in);
    REQUIRE(log.steps.size() == 3);
    CHECK(log.steps == std::vector<std::int64_t>{0, 10, 20});
    CHECK(log.train_loss[1] == doctest::Approx(3.4));
}

TEST_CASE("parse quarantines non-numeric cells") {
    std::istringstream in("step,train_loss,grad_norm\n0,4.0,0.5\n10,oops,0.4\n20,3.0,-1\n");
    auto log = parse_run_log(in);
    CHECK(log.quarantined == 2);  // the bad loss and the negative norm
    CHECK(log.steps.size() == 2);
    CHECK(!log.grad_norm[1].has_value());
}

TEST_CASE("parse requires step and train_loss columns") {
    std::istringstream in("step,loss\n0,4.0\n");
    CHECK_THROWS_AS(parse_run_log(in), SchemaError);
}

TEST_CASE("perplexity") {
    CHECK(perplexity(1.438) == doctest::Approx(4.212).epsilon(1e-3));
    CHECK(perplexity(0.0) == doctest::Approx(1.0));
    CHECK(perplexity(std::log(2.0)) == doctest::Approx(2.0));
}

TEST_CASE("perplexity exponential law") {
    for (double a : {0.1, 0.7, 1.438}) {
        for (double b : {0.0, 0.5, 2.0}) {
            CHECK(perplexity(a + b) == doctest::Approx(perplexity(a) * perplexity(b)));
        }
    }
}

TEST_CASE("smooth") {
    CHECK(smooth({1, 2, 3}, 1) == std::vector<double>{1, 2, 3});
    CHECK(smooth({5, 5, 5, 5}, 3) == std::vector<double>{5, 5, 5, 5});
    auto s = smooth({0, 10, 0}, 3);
    CHECK(s[0] == doctest::Approx(5.0));
    CHECK(s[1] == doctest::Approx(10.0 / 3));
    CHECK(s[2] == doctest::Approx(5.0));
    CHECK_THROWS_AS(smooth({1, 2}, 2), std::invalid_argument);
}

TEST_CASE("smooth preserves mean of constant-extended series") {
    std::vector<double> series(40, 2.5);
    auto s = smooth(series, 7);
    double mean = 0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    CHECK(mean == doctest::Approx(2.5));
}

TEST_CASE("divergence: constant gap is not widening") {
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    std::vector<std::optional<double>> eval;
    for (int i = 0; i <= 100; ++i) {
        steps.push_back(i * 10);
        train.push_back(3.0 - 0.02 * i);
        if (i % 5 == 0) eval.push_back(3.05 - 0.02 * i);
        else eval.push_back(std::nullopt);
    }
    auto v = detect_divergence(make_log(steps, train, eval));
    CHECK(!v.widening);
    CHECK(v.max_gap == doctest::Approx(0.05));
}

TEST_CASE("divergence: linearly rising gap is widening") {
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    std::vector<std::optional<double>> eval;
    for (int i = 0; i <= 100; ++i) {
        steps.push_back(i * 10);
        train.push_back(2.0);
        eval.push_back(2.0 + 0.005 * i);  // 0.0 -> 0.5
    }
    auto v = detect_divergence(make_log(steps, train, eval));
    CHECK(v.widening);
    CHECK(v.gap_trend_slope > 1e-5);
}

TEST_CASE("divergence requires two eval points") {
    std::vector<std::optional<double>> eval(11);
    eval[5] = 2.5;
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    for (int i = 0; i <= 10; ++i) {
        steps.push_back(i);
        train.push_back(2.0);
    }
    CHECK_THROWS_AS(detect_divergence(make_log(steps, train, eval)), NoEvalData);
}

TEST_CASE("divergence verdict invariant to a shared constant shift") {
    std::vector<std::int64_t> steps;
    std::vector<double> train, train_shift;
    std::vector<std::optional<double>> eval, eval_shift;
    for (int i = 0; i <= 50; ++i) {
        steps.push_back(i);
        train.push_back(3.0 - 0.01 * i);
        eval.push_back(3.1 - 0.01 * i);
        train_shift.push_back(train.back() + 7.0);
        eval_shift.push_back(*eval.back() + 7.0);
    }
    auto a = detect_divergence(make_log(steps, train, eval));
    auto b = detect_divergence(make_log(steps, train_shift, eval_shift));
    CHECK(a.widening == b.widening);
    CHECK(a.gap_trend_slope == doctest::Approx(b.gap_trend_slope));
}

TEST_CASE("gradient stability: warm-up spikes are exempt") {
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    std::vector<std::optional<double>> grad;
    for (int i = 0; i < 100; ++i) {
        steps.push_back(i);
        train.push_back(2.0);
        grad.push_back(i < 10 ? 3.0 : 0.3 + 0.005 * (i % 10));
    }
    auto r = grad_norm_stability(make_log(steps, train, {}, grad), 10);
    CHECK(r.stable);
    CHECK(r.fraction_below_threshold == doctest::Approx(1.0));
}

TEST_CASE("gradient stability: post-warmup spike fails") {
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    std::vector<std::optional<double>> grad;
    for (int i = 0; i < 100; ++i) {
        steps.push_back(i);
        train.push_back(2.0);
        grad.push_back(i == 50 ? 12.0 : 0.4);
    }
    auto r = grad_norm_stability(make_log(steps, train, {}, grad), 10);
    CHECK(!r.stable);
    CHECK(r.max_post_warmup_norm == doctest::Approx(12.0));
}

TEST_CASE("gradient stability: threshold is strict") {
    std::vector<std::int64_t> steps;
    std::vector<double> train;
    std::vector<std::optional<double>> grad;
    for (int i = 0; i < 50; ++i) {
        steps.push_back(i);
        train.push_back(2.0);
        grad.push_back(1.0);
    }
    auto r = grad_norm_stability(make_log(steps, train, {}, grad), 5);
    CHECK(!r.stable);
    CHECK(r.fraction_below_threshold == 0.0);
}

TEST_CASE("gradient stability requires data") {
    std::vector<std::int64_t> steps{1, 2, 3};
    std::vector<double> train{1, 1, 1};
    CHECK_THROWS_AS(grad_norm_stability(make_log(steps, train), 0), NoGradData);
}

TEST_CASE("curve quality: smooth decay") {
    std::vector<double> series;
    for (int i = 0; i < 200; ++i) series.push_back(1.0 + 3.0 * std::exp(-i / 40.0));
    auto q = curve_quality(series);
    CHECK(q.monotonicity == doctest::Approx(1.0));
    CHECK(q.oscillation_score < 0.01);
    CHECK(q.plateau_score > 0.0);
}

TEST_CASE("curve quality: flat series") {
    std::vector<double> series(50, 2.0);
    auto q = curve_quality(series);
    CHECK(q.plateau_score == doctest::Approx(0.0));
    CHECK(q.monotonicity == doctest::Approx(1.0));
    CHECK(q.oscillation_score == doctest::Approx(0.0));
}

TEST_CASE("curve quality: added tail noise raises oscillation") {
    std::vector<double> base, noisy;
    for (int i = 0; i < 200; ++i) {
        double v = 1.0 + 3.0 * std::exp(-i / 40.0);
        base.push_back(v);
        noisy.push_back(v + ((i % 2 == 0) ? 0.05 : -0.05));
    }
    CHECK(curve_quality(noisy).oscillation_score > curve_quality(base).oscillation_score);
}

TEST_CASE("curve quality: oscillation scales with noise amplitude, invariant to scale") {
    auto series_with_amp = [](double amp) {
        std::vector<double> s;
        for (int i = 0; i < 200; ++i) {
            s.push_back(2.0 + ((i % 2 == 0) ? amp : -amp));
        }
        return s;
    };
    const double s1 = curve_quality(series_with_amp(0.01)).oscillation_score;
    const double s2 = curve_quality(series_with_amp(0.02)).oscillation_score;
    CHECK(s2 == doctest::Approx(2.0 * s1).epsilon(0.05));

    // multiplying the whole series by a positive factor leaves it unchanged
    auto base = series_with_amp(0.05);
    auto scaled = base;
    for (auto& v : scaled) v *= 3.0;
    CHECK(curve_quality(scaled).oscillation_score ==
          doctest::Approx(curve_quality(base).oscillation_score));
}

TEST_CASE("curve quality separates regimes") {
    // oscillating plateau vs smooth decay
    std::vector<double> plateau, decay;
    for (int i = 0; i < 300; ++i) {
        decay.push_back(0.9 + 3.0 * std::exp(-i / 60.0));
        double base = (i < 60) ? 3.9 - 0.02 * i : 2.7;
        plateau.push_back(base + ((i % 2 == 0) ? 0.12 : -0.12));
    }
    auto qp = curve_quality(plateau);
    auto qd = curve_quality(decay);
    CHECK(qp.oscillation_score > qd.oscillation_score);
    CHECK(qp.plateau_score < qd.plateau_score);
}

TEST_CASE("curve quality needs ten points") {
    std::vector<double> series(9, 1.0);
    CHECK_THROWS_AS(curve_quality(series), SeriesTooShort);
}
