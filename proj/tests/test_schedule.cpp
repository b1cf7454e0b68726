#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "petdiff/rng.hpp"
#include "petdiff/schedule.hpp"

using namespace petdiff;

TEST_CASE("constant beta 0.1 alpha_bar table") {
    auto s = make_schedule(4, "linear", 0.1, 0.1);
    std::vector<double> want{1.0, 0.9, 0.81, 0.729, 0.6561};
    REQUIRE(s.alpha_bar.size() == 5);
    for (int t = 0; t <= 4; ++t) CHECK(s.alpha_bar[t] == doctest::Approx(want[t]).epsilon(1e-15));
    CHECK(s.beta_tilde[1] == 0.0);
    CHECK(s.beta_tilde[2] == doctest::Approx(0.1 * (1 - 0.9) / (1 - 0.81)).epsilon(1e-15));
}

TEST_CASE("default linear schedule nearly destroys signal at T") {
    auto s = make_schedule(1000, "linear", 1e-4, 0.02);
    CHECK(s.alpha_bar[1000] < 1e-4);
    CHECK(s.alpha_bar[1000] == doctest::Approx(4.035829765375676e-05).epsilon(1e-12));
    for (int t = 1; t <= 1000; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
}

TEST_CASE("beta_tilde never exceeds beta") {
    for (auto [b0, b1] : {std::pair{1e-4, 0.02}, {0.05, 0.05}, {0.3, 0.001}}) {
        auto s = make_schedule(200, "linear", b0, b1);
        for (int t = 1; t <= s.T; ++t) CHECK(s.beta_tilde[t] <= s.beta[t] + 1e-18);
    }
}

TEST_CASE("posterior variance grows along a constant chain") {
    auto s = make_schedule(50, "linear", 0.1, 0.1);
    for (int t = 2; t <= 50; ++t) CHECK(posterior_variance(s, t) >= posterior_variance(s, t - 1));
    CHECK(posterior_variance(s, 1) == 0.0);
}

TEST_CASE("q_sample closed form, frozen scalar case") {
    auto s = make_schedule(2, "linear", 0.5, 0.5);  // alpha_bar = [1, .5, .25]
    CHECK(q_sample(1.0, 2.0, s, 2) == doctest::Approx(2.232050807568877).epsilon(1e-15));
    CHECK(q_sample(3.25, 0.7, s, 0) == 3.25);  // t=0 is the identity
}

TEST_CASE("q_sample image form matches scalar form") {
    auto s = make_schedule(10, "linear", 1e-3, 0.3);
    RandomStream r(31);
    std::vector<float> x0(37), eps(37), out(37);
    for (size_t i = 0; i < x0.size(); ++i) {
        x0[i] = float(r.normal());
        eps[i] = float(r.normal());
    }
    q_sample(x0.data(), eps.data(), out.data(), x0.size(), s, 7);
    for (size_t i = 0; i < x0.size(); ++i)
        CHECK(out[i] == float(q_sample(double(x0[i]), double(eps[i]), s, 7)));
}

TEST_CASE("posterior mean: frozen value and exact t=1 behavior") {
    auto s = make_schedule(3, "linear", 0.1, 0.1);
    CHECK(posterior_mean(2.0, 1.0, s, 2) == doctest::Approx(1.497920996921864).epsilon(1e-14));
    CHECK(posterior_mean(123.456, 0.875, s, 1) == 0.875);

    std::vector<float> xt{2.f, -1.f}, x0{1.f, 0.5f}, out(2);
    posterior_mean(xt.data(), x0.data(), out.data(), 2, s, 1);
    CHECK(out[0] == 1.f);
    CHECK(out[1] == 0.5f);
}

TEST_CASE("direct q_sample matches the iterated chain in distribution") {
    // scalar chain, T=3: moments of x_3 via one shot vs three transitions,
    // both against the analytic mean sqrt(ab)x0 and variance 1-ab
    auto s = make_schedule(3, "linear", 0.1, 0.1);
    const double x0 = 0.7;
    const int N = 200000;
    double ab = s.alpha_bar[3];
    double want_mean = std::sqrt(ab) * x0;
    double want_var = 1.0 - ab;

    RandomStream r(derive_seed(2024, "chain"));
    double s1 = 0, s2 = 0, i1 = 0, i2 = 0;
    for (int k = 0; k < N; ++k) {
        double direct = q_sample(x0, r.normal(), s, 3);
        s1 += direct;
        s2 += direct * direct;
        double x = x0;
        for (int t = 1; t <= 3; ++t) x = std::sqrt(1.0 - s.beta[t]) * x + std::sqrt(s.beta[t]) * r.normal();
        i1 += x;
        i2 += x * x;
    }
    double se_mean = std::sqrt(want_var / N);
    double se_var = want_var * std::sqrt(2.0 / (N - 1.0));
    for (auto [sum, sumsq] : {std::pair{s1, s2}, {i1, i2}}) {
        double m = sum / N;
        double v = sumsq / N - m * m;
        CHECK(std::fabs(m - want_mean) < 3 * se_mean);
        CHECK(std::fabs(v - want_var) < 3 * se_var);
    }
}

TEST_CASE("schedule rejects bad arguments") {
    CHECK_THROWS_AS(make_schedule(0, "linear", 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, "cosine", 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, "linear", 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, "linear", 0.1, 1.0), std::invalid_argument);

    auto s = make_schedule(5, "linear", 0.1, 0.1);
    CHECK_THROWS_AS(q_sample(0.0, 0.0, s, 6), std::out_of_range);
    CHECK_THROWS_AS(q_sample(0.0, 0.0, s, -1), std::out_of_range);
    CHECK_THROWS_AS(posterior_mean(0.0, 0.0, s, 0), std::out_of_range);
    CHECK_THROWS_AS(posterior_variance(s, 0), std::out_of_range);
}
