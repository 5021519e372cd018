#pragma once

#include "ensil/core.hpp"
#include "ensil/entropy.hpp"
#include "ensil/legendre.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ensil {

enum class SignMode { dissipative, free, production };

struct Weights {
    double data = 1.0;
    double thermo = 1.0;
    double constraint = 0.0;
};

struct EnsilProblem {
    EntropyTrace entropy;
    TermMatrix terms;
    SignMode sign_mode = SignMode::dissipative;
    Weights weights;
    int legendre_order = 20;
    bool apply_constraint_loss = false;
    bool free_offset = false;  // treat S(t_0) as unknown instead of taking the measured value
    std::optional<Vec> theta_init;
    std::optional<Vec> lower_bounds;  // -inf entries mean unbounded
    std::optional<std::vector<double>> theta_true;
    long max_iterations = 100000;
    double grad_tol = 1e-10;
};

struct SmoothedTerms {
    int order = 0;
    std::vector<LegendreSeries> series;
    Mat values;     // smoothed g_j at the sample times
    Mat integrals;  // int_{t_0}^{t_i} of the smoothed g_j
};

SmoothedTerms smooth_and_integrate(const TermMatrix& terms, int n);

struct LossValue {
    double total = 0.0;
    double data = 0.0;
    double thermo = 0.0;
    double constraint = 0.0;
    Vec grad;
};

class EnsilLoss {
public:
    explicit EnsilLoss(const EnsilProblem& prob);
    LossValue operator()(const Vec& theta) const;
    const SmoothedTerms& smoothed() const { return sm_; }
    const Vec& target() const { return y_; }  // S(t_i) - S(t_0)
    Vec predicted(const Vec& theta) const;    // S-hat(t_i)
    // data-loss regression: design * theta ~ data_target (both centered when the offset is free)
    const Mat& design() const { return A_; }
    const Vec& data_target() const { return yd_; }

private:
    SmoothedTerms sm_;
    Vec y_;
    Mat A_;
    Vec yd_;
    bool free_offset_ = false;
    double S0_ = 0.0;
    double sign_ = 0.0;
    Weights w_;
    bool constraint_ = false;
};

LossValue ensil_loss(const Vec& theta, const EnsilProblem& prob);

// closed-form least squares on the data loss alone
Vec least_squares_theta(const EnsilProblem& prob);

FitResult fit_ensil(const EnsilProblem& prob);

double mre(const std::vector<double>& theta_hat, const std::vector<double>& theta_true);

struct MreReport {
    double percent = 0.0;
    std::vector<double> zero_abs_errors;  // |theta_hat_j| where theta_true_j == 0
};
MreReport mre_report(const std::vector<double>& theta_hat, const std::vector<double>& theta_true);

struct LibrarySpec {
    int degree = 3;
    double threshold = 0.05;
    double ridge = 0.0;
    int max_rounds = 20;
};

struct SindyModel {
    std::vector<std::vector<int>> exponents;  // one entry per library column, over the library species
    std::vector<std::string> labels;
    std::vector<int> equations;               // species index per coefficient column
    Mat coeffs;                               // library x equations
    bool degenerate = false;                  // every coefficient thresholded away

    double coeff(int equation_col, const std::vector<int>& exps) const;
};

// library_species empty = monomials in every species
SindyModel fit_integral_sindy(const TimeSeries& ts, const LibrarySpec& spec, const std::vector<int>& equations,
                              std::vector<int> library_species = {});

struct FpeOptions {
    double t_start = 0.3;
    int grid_points = 512;
    double pad = 4.0;
    double bandwidth_factor = 1.0;
    bool extrapolate = true;        // cancel the O(h^2) smoothing bias from two bandwidths
    double extrapolate_ratio = 1.4142135623730951;
    int legendre_order = 20;
    Weights weights;
    bool stage2 = true;
    std::optional<std::vector<double>> theta_true;
};

struct FpeFit {
    FitResult stage1;
    FitResult result;
    std::vector<std::array<double, 4>> per_bandwidth;  // stage-2 estimates before extrapolation
    EntropyTrace entropy;                               // primary bandwidth
    TermMatrix terms;
};

FpeFit fit_fpe(const ParticleEnsemble& ensemble, const FpeOptions& opt);

struct PmeFitOptions {
    int legendre_order = 25;
    double filter_frac = 0.0;
    Weights weights;
    std::optional<std::vector<double>> theta_true;
};

FitResult fit_pme(const FieldSeries& fs, double m, const PmeFitOptions& opt);

}  // namespace ensil
