#pragma once

#include "ensil/core.hpp"

#include <utility>
#include <vector>

namespace ensil {

struct LegendreSeries {
    Vec coeffs;  // a_0..a_n
    double t_start = -1.0;
    double t_end = 1.0;

    int order() const { return static_cast<int>(coeffs.size()) - 1; }
    double tau(double t) const { return 2.0 * (t - t_start) / (t_end - t_start) - 1.0; }
};

double eval_P(int m, double tau);

// P_0..P_n at tau in one recurrence sweep
void eval_P_all(int n, double tau, double* out);

LegendreSeries project(const std::vector<double>& times, const Vec& y, int n, std::pair<double, double> window);

// Reusable factorization of the projection design for one time grid.
class Projector {
public:
    Projector(const std::vector<double>& times, int n, std::pair<double, double> window);
    LegendreSeries fit(const Vec& y) const;
    Mat fit_many(const Mat& Y) const;  // one coefficient column per input column
    int order() const { return n_; }
    const Mat& basis() const { return basis_; }  // samples x (n+1)

private:
    int n_;
    double t0_, t1_;
    Mat basis_;
    Eigen::ColPivHouseholderQR<Mat> qr_;
};

LegendreSeries antiderivative(const LegendreSeries& s);

double eval_series(const LegendreSeries& s, double t);
Vec eval_series(const LegendreSeries& s, const std::vector<double>& times);

// cap so the fit keeps at least two samples per coefficient
int effective_order(int n, std::size_t samples);

// Replace each column by its order-n projection; n <= 0 returns the input.
TimeSeries denoise(const TimeSeries& ts, int n);

}  // namespace ensil
