#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ensil {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct TimeSeries {
    std::vector<double> times;
    Mat values;  // rows = samples, cols = species
    std::vector<std::string> species_names;
    bool uniform = true;

    std::size_t size() const { return times.size(); }
    std::size_t n_species() const { return species_names.size(); }
    Vec column(const std::string& name) const;
    int index_of(const std::string& name) const;
};

struct Violation {
    std::size_t row = 0;
    std::size_t col = 0;
    std::string what;
};

std::vector<Violation> validate(const TimeSeries& ts);

void save_csv(const TimeSeries& ts, const std::string& path);
TimeSeries load_csv(const std::string& path);

struct Reaction {
    std::vector<int> nu_fwd;  // reactant stoichiometry
    std::vector<int> nu_bwd;  // product stoichiometry
    double k_fwd = 0.0;
    double k_bwd = 0.0;
};

struct ReactionNetwork {
    std::vector<std::string> species;
    std::vector<Reaction> reactions;
    std::vector<bool> chemostat_mask;
    std::vector<double> chemostat_values;

    std::size_t n_species() const { return species.size(); }
    void check() const;
};

struct Grid2D {
    int nx = 128;
    int ny = 128;
    double x_lo = -8.0, x_hi = 8.0;
    double y_lo = -8.0, y_hi = 8.0;
    bool periodic = true;

    double hx() const { return (x_hi - x_lo) / nx; }
    double hy() const { return (y_hi - y_lo) / ny; }
    double x(int i) const { return x_lo + i * hx(); }
    double y(int j) const { return y_lo + j * hy(); }
    std::size_t points() const { return static_cast<std::size_t>(nx) * ny; }
    void check() const;
};

// Row-major field: value at (i, j) is data[i * ny + j], i along x.
struct Field {
    std::vector<double> data;
    double& at(const Grid2D& g, int i, int j) { return data[static_cast<std::size_t>(i) * g.ny + j]; }
    double at(const Grid2D& g, int i, int j) const { return data[static_cast<std::size_t>(i) * g.ny + j]; }
};

double grid_integral(const Grid2D& g, const Field& f);

struct FieldSeries {
    Grid2D grid;
    std::vector<double> times;
    std::vector<Field> fields;
    std::string params_json = "{}";
};

void save_field_series(const FieldSeries& fs, const std::string& dir);
FieldSeries load_field_series(const std::string& dir);

struct ParticleEnsemble {
    std::vector<double> times;
    std::vector<std::vector<double>> samples;
    double sigma_used = 0.0;
    std::uint64_t seed = 0;

    std::size_t particles() const { return samples.empty() ? 0 : samples.front().size(); }
};

void save_ensemble_csv(const ParticleEnsemble& pe, const std::string& path);
ParticleEnsemble load_ensemble_csv(const std::string& path);

struct TermMatrix {
    std::vector<double> times;
    Mat columns;
    std::vector<std::string> term_labels;
    std::vector<bool> structural_zero;  // flagged columns are carried but not fitted
};

void save_terms_csv(const TermMatrix& tm, const std::string& path);

struct FitResult {
    std::vector<double> theta_hat;
    std::optional<std::vector<double>> theta_true;
    double loss_data = 0.0;
    double loss_thermo = 0.0;
    double loss_constraint = 0.0;
    std::optional<double> mre_percent;
    int legendre_order = 0;
    long iterations = 0;
    bool converged = false;
};

std::string to_json(const FitResult& r);
void save_json(const FitResult& r, const std::string& path);
FitResult fit_from_json(const std::string& text);

enum class NoiseKind { additive, multiplicative };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::additive;
    double epsilon = 0.0;
    double sigma = 1.0;
    std::uint64_t seed = 0;
};

// %.17g, round-trips every double
std::string fmt_num(double v);

}  // namespace ensil
