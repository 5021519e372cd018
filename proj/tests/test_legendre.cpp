#include <doctest.h>

#include "ensil/legendre.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

using namespace ensil;

namespace {

// explicit sum: P_m = 2^-m sum_k (-1)^k C(m,k) C(2m-2k,m) tau^(m-2k), at 50 digits
double explicit_P(int m, double tau)
{
    using big = boost::multiprecision::cpp_bin_float_50;
    auto binom = [](int n, int k) {
        big r = 1;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    big s = 0, x = tau;
    for (int k = 0; k <= m / 2; ++k)
        s += ((k % 2) ? -1 : 1) * binom(m, k) * binom(2 * m - 2 * k, m) * pow(x, m - 2 * k);
    return static_cast<double>(s / pow(big(2), m));
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 40)
{
    std::function<double(double, double, double, double, double, double, int)> rec =
        [&](double a0, double b0, double fa, double fm, double fb, double whole, int d) {
            double m = 0.5 * (a0 + b0), lm = 0.5 * (a0 + m), rm = 0.5 * (m + b0);
            double flm = f(lm), frm = f(rm);
            double left = (m - a0) / 6 * (fa + 4 * flm + fm), right = (b0 - m) / 6 * (fm + 4 * frm + fb);
            if (d <= 0 || std::abs(left + right - whole) <= 15 * eps) return left + right + (left + right - whole) / 15;
            return rec(a0, m, fa, flm, fm, left, d - 1) + rec(m, b0, fm, frm, fb, right, d - 1);
        };
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), depth);
}

std::vector<double> uniform_times(int n, double a, double b)
{
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = a + (b - a) * i / (n - 1);
    return t;
}

}  // namespace

TEST_CASE("low orders have their closed forms")
{
    CHECK(eval_P(0, 0.37) == 1.0);
    CHECK(eval_P(1, -0.42) == -0.42);
    CHECK(eval_P(2, 0.5) == doctest::Approx(-0.125).epsilon(1e-15));
    CHECK_THROWS(eval_P(-1, 0.0));
    CHECK_THROWS(eval_P(2, 1.1));
    CHECK_NOTHROW(eval_P(2, 1.0 + 1e-13));
}

TEST_CASE("recurrence agrees with the explicit sum up to order 30")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        double tau = u(rng);
        for (int m = 0; m <= 30; ++m) {
            double a = eval_P(m, tau), b = explicit_P(m, tau);
            worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
        }
    }
    CHECK(worst < 1e-12);
    std::vector<double> all(31);
    eval_P_all(30, 0.3, all.data());
    for (int m = 0; m <= 30; ++m) CHECK(all[m] == eval_P(m, 0.3));
}

TEST_CASE("projection of a constant is a single P0 coefficient")
{
    auto t = uniform_times(40, 2.0, 5.0);
    Vec y = Vec::Constant(40, 3.25);
    LegendreSeries s = project(t, y, 6, {2.0, 5.0});
    CHECK(s.coeffs[0] == doctest::Approx(3.25).epsilon(1e-13));
    for (int m = 1; m <= 6; ++m) CHECK(std::abs(s.coeffs[m]) < 1e-12);
}

TEST_CASE("tau squared expands into P0 and P2")
{
    auto t = uniform_times(100, -1.0, 1.0);
    Vec y(100);
    for (int i = 0; i < 100; ++i) y[i] = t[i] * t[i];
    LegendreSeries s = project(t, y, 2, {-1.0, 1.0});
    CHECK(std::abs(s.coeffs[0] - 1.0 / 3.0) < 1e-10);
    CHECK(std::abs(s.coeffs[1]) < 1e-10);
    CHECK(std::abs(s.coeffs[2] - 2.0 / 3.0) < 1e-10);
}

TEST_CASE("six samples of P5 interpolate exactly")
{
    auto t = uniform_times(6, -1.0, 1.0);
    Vec y(6);
    for (int i = 0; i < 6; ++i) y[i] = eval_P(5, t[i]);
    LegendreSeries s = project(t, y, 5, {-1.0, 1.0});
    for (int m = 0; m <= 5; ++m) CHECK(std::abs(s.coeffs[m] - (m == 5 ? 1.0 : 0.0)) < 1e-9);
}

TEST_CASE("projection minimizes the residual like the normal equations")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    auto t = uniform_times(30, 0.0, 3.0);
    Vec y(30);
    for (auto& v : y) v = n01(rng);
    const int n = 4;
    LegendreSeries s = project(t, y, n, {0.0, 3.0});
    Mat B(30, n + 1);
    for (int i = 0; i < 30; ++i)
        for (int m = 0; m <= n; ++m) B(i, m) = eval_P(m, s.tau(t[i]));
    Vec ne = (B.transpose() * B).ldlt().solve(B.transpose() * y);
    CHECK((ne - s.coeffs).norm() < 1e-10);
}

TEST_CASE("too few distinct samples is rank deficient")
{
    std::vector<double> t = {0.0, 0.0, 1.0, 1.0};
    CHECK_THROWS(project(t, Vec::Ones(4), 2, {0.0, 1.0}));
    CHECK_THROWS(project(uniform_times(3, 0, 1), Vec::Ones(3), 3, {0.0, 1.0}));
}

TEST_CASE("antiderivative closed forms")
{
    LegendreSeries one{Vec::Constant(1, 1.0), 0.0, 2.0};
    LegendreSeries I = antiderivative(one);
    for (double t : {0.0, 0.3, 1.1, 2.0}) CHECK(std::abs(eval_series(I, t) - t) < 1e-14);
    CHECK(std::abs(eval_series(I, 2.0) - 2.0) < 1e-14);

    LegendreSeries p1{Vec::Unit(2, 1), -1.0, 1.0};
    LegendreSeries I1 = antiderivative(p1);
    for (double tau : {-1.0, -0.4, 0.2, 0.9}) CHECK(std::abs(eval_series(I1, tau) - (tau * tau - 1) / 2) < 1e-14);

    for (int m = 1; m <= 12; ++m) {
        LegendreSeries pm{Vec::Unit(m + 1, m), -1.0, 1.0};
        CHECK(std::abs(eval_series(antiderivative(pm), 1.0)) < 1e-13);
    }
}

TEST_CASE("exact integration matches adaptive quadrature")
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        int n = 1 + trial % 15;
        LegendreSeries s{Vec(n + 1), 0.5, 0.5 + 4.0 * u(rng) + 0.1};
        for (int m = 0; m <= n; ++m) s.coeffs[m] = n01(rng);
        LegendreSeries I = antiderivative(s);
        for (int k = 0; k < 5; ++k) {
            double t = s.t_start + u(rng) * (s.t_end - s.t_start);
            double q = adaptive_simpson([&](double x) { return eval_series(s, x); }, s.t_start, t, 1e-14);
            worst = std::max(worst, std::abs(eval_series(I, t) - q));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("evaluation outside the window is an error")
{
    LegendreSeries s{Vec::Constant(3, 1.0), 0.0, 1.0};
    CHECK(eval_series(LegendreSeries{Vec::Constant(1, 2.5), 0.0, 1.0}, 0.7) == 2.5);
    CHECK_NOTHROW(eval_series(s, 1.0 + 1e-10));
    CHECK_THROWS(eval_series(s, 1.0 + 1e-6));
    CHECK_THROWS(eval_series(s, -0.01));
}

TEST_CASE("sine is resolved to 1e-8 at order 20")
{
    auto t = uniform_times(400, 0.0, std::numbers::pi);
    Vec y(400);
    for (int i = 0; i < 400; ++i) y[i] = std::sin(t[i]);
    LegendreSeries s = project(t, y, 20, {0.0, std::numbers::pi});
    Vec back = eval_series(s, t);
    CHECK((back - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projection is idempotent")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    const int n = 9;
    LegendreSeries s{Vec(n + 1), -2.0, 3.0};
    for (auto& c : s.coeffs) c = n01(rng);
    auto t = uniform_times(2 * (n + 1), -2.0, 3.0);
    LegendreSeries again = project(t, eval_series(s, t), n, {-2.0, 3.0});
    CHECK((again.coeffs - s.coeffs).norm() < 1e-10);
}

TEST_CASE("effective order keeps two samples per coefficient")
{
    CHECK(effective_order(20, 1001) == 20);
    CHECK(effective_order(20, 21) == 10);
    CHECK(effective_order(5, 3) == 1);
}

TEST_CASE("denoise projects every column and leaves order zero alone")
{
    TimeSeries ts;
    ts.species_names = {"a", "b"};
    ts.times = uniform_times(200, 0.0, 1.0);
    ts.values.resize(200, 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    for (int i = 0; i < 200; ++i) {
        ts.values(i, 0) = std::exp(-ts.times[i]) + 1e-3 * n01(rng);
        ts.values(i, 1) = 2.0 + ts.times[i] * ts.times[i];
    }
    TimeSeries same = denoise(ts, 0);
    CHECK(same.values == ts.values);
    TimeSeries d = denoise(ts, 8);
    double err0 = 0.0, err1 = 0.0;
    for (int i = 0; i < 200; ++i) {
        err0 = std::max(err0, std::abs(d.values(i, 0) - std::exp(-ts.times[i])));
        err1 = std::max(err1, std::abs(d.values(i, 1) - ts.values(i, 1)));
    }
    CHECK(err0 < 1e-3);
    CHECK(err1 < 1e-12);
}
