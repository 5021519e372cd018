#pragma once

#include "ensil/core.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ensil {

enum class EntropyKind { free_energy, open_entropy, pme_entropy, shannon };

struct EntropyTrace {
    std::vector<double> times;
    Vec S;
    EntropyKind kind = EntropyKind::free_energy;
    std::optional<Vec> reference_state;
};

void save_trace_csv(const EntropyTrace& tr, const std::string& path);

// log floor relative to a column or field maximum
inline constexpr double kClampRel = 1e-12;

// clamp each column at kClampRel * its max |value|
Mat clamp_columns(const Mat& values);

double free_energy(const Vec& c, const Vec& c_ref);
EntropyTrace free_energy_trace(const TimeSeries& ts, double T_ref);
// index of the sample used as the reference state
std::size_t reference_index(const TimeSeries& ts, double T_ref);

TermMatrix mm_terms(const TimeSeries& ts, const Vec& c_ref);
TermMatrix schlogl_terms(const TimeSeries& ts, const Vec& c_ref);

// S = sum_i (x_i ln x_i - x_i) over x1..x3
double lorenz_entropy(const Vec& x);
EntropyTrace lorenz_entropy_trace(const TimeSeries& ts);
// needs species x1, x2, x3, r1, r2, r3
TermMatrix lorenz_terms(const TimeSeries& ts);

double pme_entropy(const Grid2D& g, const Field& rho, double m);
// low-pass exp(-(|k| / (frac * k_nyquist))^8) applied first when frac > 0
Field spectral_filter(const Grid2D& g, const Field& rho, double frac);
EntropyTrace pme_entropy_trace(const FieldSeries& fs, double m, double filter_frac = 0.0);
TermMatrix pme_terms(const FieldSeries& fs, double m, double filter_frac = 0.0);

struct Grid1D {
    double lo = 0.0;
    double dx = 1.0;
    int n = 0;
    double x(int k) const { return lo + k * dx; }
    double hi() const { return lo + (n - 1) * dx; }
};

std::vector<double> spectral_gradient(const std::vector<double>& f, double h);
std::pair<Field, Field> spectral_gradient(const Grid2D& g, const Field& f);

double trapezoid(const Grid1D& g, const std::vector<double>& f);

struct DensityCurve {
    Grid1D grid;
    std::vector<double> p;
    double bandwidth = 0.0;
};

double silverman_bandwidth(const std::vector<double>& samples);
// [min - pad*h, max + pad*h] of the pooled samples, h the widest Silverman bandwidth
Grid1D fpe_grid(const std::vector<std::vector<double>>& snapshots, int n = 512, double pad = 4.0);
DensityCurve kde(const std::vector<double>& samples, const Grid1D& grid, std::optional<double> bandwidth = std::nullopt);

double shannon_entropy(const DensityCurve& p);

// drift coefficients (theta3, theta1, theta0): u(x) = theta3 x^3 + theta1 x + theta0
using Drift = std::array<double, 3>;

std::vector<double> fpe_flux(const DensityCurve& p, const Drift& theta, double D);
DensityCurve stationary_density(const Drift& theta, double D, const Grid1D& grid);

// columns (theta3, theta1, theta0, D); theta0 flagged structurally zero
TermMatrix fpe_entropy_balance_terms(const std::vector<DensityCurve>& pd, const std::vector<double>& times);

double relative_entropy(const DensityCurve& p, const DensityCurve& p_ss);
double free_energy_dissipation(const DensityCurve& p, const std::vector<double>& J, const DensityCurve& p_ss);

struct Decomposition {
    double excess_heat_rate = 0.0;
    double nonadiabatic_epr = 0.0;
    double entropy_rate = 0.0;  // -int J d_x ln p on the same quadrature
};
Decomposition entropy_decomposition(const DensityCurve& p, const std::vector<double>& J, const DensityCurve& p_ss);

// <x^q>, q = 0..qmax, by trapezoid on the density
std::vector<double> density_moments(const DensityCurve& p, int qmax);
// Monte-Carlo cross-check: sample mean of f and its standard error
std::pair<double, double> mc_expectation(const std::vector<double>& samples, const std::function<double(double)>& f);

}  // namespace ensil
