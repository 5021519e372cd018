#include "ensil/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ensil {

double eval_P(int m, double tau)
{
    if (m < 0) throw std::invalid_argument("Legendre order must be nonnegative");
    if (std::abs(tau) > 1.0 + 1e-12) throw std::domain_error("tau outside [-1, 1]");
    if (m == 0) return 1.0;
    double p0 = 1.0, p1 = tau;
    for (int k = 1; k < m; ++k) {
        double p2 = ((2.0 * k + 1.0) * tau * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

void eval_P_all(int n, double tau, double* out)
{
    out[0] = 1.0;
    if (n == 0) return;
    out[1] = tau;
    for (int k = 1; k < n; ++k) out[k + 1] = ((2.0 * k + 1.0) * tau * out[k] - k * out[k - 1]) / (k + 1.0);
}

Projector::Projector(const std::vector<double>& times, int n, std::pair<double, double> window)
    : n_(n), t0_(window.first), t1_(window.second)
{
    if (n < 0) throw std::invalid_argument("Legendre order must be nonnegative");
    if (!(t1_ > t0_)) throw std::invalid_argument("empty projection window");
    const auto m = static_cast<Eigen::Index>(times.size());
    if (m < n + 1) throw std::invalid_argument("projection needs at least n+1 samples");
    const double slack = 1e-9 * (t1_ - t0_);
    basis_.resize(m, n + 1);
    std::vector<double> row(n + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        double t = times[i];
        if (t < t0_ - slack || t > t1_ + slack) throw std::invalid_argument("sample time outside projection window");
        double tau = std::clamp(2.0 * (t - t0_) / (t1_ - t0_) - 1.0, -1.0, 1.0);
        eval_P_all(n, tau, row.data());
        for (int k = 0; k <= n; ++k) basis_(i, k) = row[k];
    }
    qr_.compute(basis_);
    if (qr_.rank() < n + 1) throw std::invalid_argument("rank-deficient Legendre design (too few distinct times)");
}

LegendreSeries Projector::fit(const Vec& y) const
{
    if (y.size() != basis_.rows()) throw std::invalid_argument("sample count mismatch in projection");
    return {qr_.solve(y), t0_, t1_};
}

Mat Projector::fit_many(const Mat& Y) const
{
    if (Y.rows() != basis_.rows()) throw std::invalid_argument("sample count mismatch in projection");
    return qr_.solve(Y);
}

LegendreSeries project(const std::vector<double>& times, const Vec& y, int n, std::pair<double, double> window)
{
    return Projector(times, n, window).fit(y);
}

LegendreSeries antiderivative(const LegendreSeries& s)
{
    const int n = s.order();
    LegendreSeries out;
    out.t_start = s.t_start;
    out.t_end = s.t_end;
    out.coeffs = Vec::Zero(n + 2);
    const Vec& a = s.coeffs;
    // int P_0 = P_1 + P_0 ; int P_m = (P_{m+1} - P_{m-1}) / (2m+1)
    out.coeffs[0] += a[0];
    out.coeffs[1] += a[0];
    for (int m = 1; m <= n; ++m) {
        double c = a[m] / (2.0 * m + 1.0);
        out.coeffs[m + 1] += c;
        out.coeffs[m - 1] -= c;
    }
    // P_m(-1) = (-1)^m, so the pure P_m antiderivatives already vanish at tau = -1
    out.coeffs *= 0.5 * (s.t_end - s.t_start);
    return out;
}

double eval_series(const LegendreSeries& s, double t)
{
    const double len = s.t_end - s.t_start;
    if (t < s.t_start - 1e-9 * len || t > s.t_end + 1e-9 * len)
        throw std::domain_error("evaluation outside the series window");
    double tau = std::clamp(s.tau(t), -1.0, 1.0);
    // Clenshaw on the three-term recurrence
    const int n = s.order();
    double b1 = 0.0, b2 = 0.0;
    for (int k = n; k >= 1; --k) {
        double alpha = (2.0 * k + 1.0) / (k + 1.0) * tau;
        double beta = -(k + 1.0) / (k + 2.0);
        double b0 = s.coeffs[k] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    return s.coeffs[0] + tau * b1 - 0.5 * b2;
}

Vec eval_series(const LegendreSeries& s, const std::vector<double>& times)
{
    Vec out(static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = eval_series(s, times[i]);
    return out;
}

int effective_order(int n, std::size_t samples)
{
    int cap = samples > 0 ? static_cast<int>((samples - 1) / 2) : 0;
    return std::max(0, std::min(n, cap));
}

TimeSeries denoise(const TimeSeries& ts, int n)
{
    if (n <= 0) return ts;
    int ne = effective_order(n, ts.times.size());
    Projector pr(ts.times, ne, {ts.times.front(), ts.times.back()});
    TimeSeries out = ts;
    out.values = pr.basis() * pr.fit_many(ts.values);
    return out;
}

}  // namespace ensil
