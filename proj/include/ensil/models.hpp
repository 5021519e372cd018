#pragma once

#include "ensil/core.hpp"

#include <cstdint>
#include <functional>
#include <random>

namespace ensil {

struct DoubleWellParams {
    double a = 0.1, b = 0.3, c = 0.0;
    double sigma = 1.0;

    double D() const { return 0.5 * sigma * sigma; }
    double drift(double x) const { return -a * x * x * x + b * x + c; }
};

struct PMEParams {
    double m = 2.0;
    double k1 = 10.0, k2 = 50.0, k3 = 30.0;
    void check() const;
};

// net rates dc/dt for a mass-action network; chemostatted entries are zero
void mass_action_rhs(const ReactionNetwork& net, const double* c, double* dcdt);

// RK4 with `substeps` internal steps per output interval dt
TimeSeries integrate_mass_action(const ReactionNetwork& net, const Vec& ic, double dt, double t_end, int substeps = 1);

ReactionNetwork build_mm();
ReactionNetwork build_schlogl();
ReactionNetwork build_lorenz();

// rate constants in fitting order
std::vector<double> mm_rates(const ReactionNetwork& net);
std::vector<double> schlogl_rates(const ReactionNetwork& net);
std::vector<double> lorenz_rates(const ReactionNetwork& net);

// Lorenz-coordinate state (X, Y, Z) to chemical concentrations (x1, x2, x3, r1, r2, r3)
Vec lorenz_state_from_xyz(double X, double Y, double Z);

Field pme_three_bumps(const Grid2D& g);
Field gaussian_bump(const Grid2D& g, double x0, double y0, double s2);

// snapshots every dt, RK4 with `substeps` internal steps
FieldSeries solve_pme(const PMEParams& p, const Grid2D& g, const Field& rho0, double dt, double t_end, int substeps);

using Sampler = std::function<double(std::mt19937_64&)>;

struct LangevinOptions {
    std::size_t n_samples = 100000;
    double dt = 0.01;         // Euler-Maruyama step
    double sample_dt = 0.1;   // snapshot interval
    double t_end = 10.0;
    std::uint64_t seed = 1;
    int partitions = 1;       // rng streams; results independent of worker count
    int jobs = 1;
    Sampler x0;               // default: all particles at 0
};

ParticleEnsemble simulate_langevin(const DoubleWellParams& p, const LangevinOptions& opt);

// generator for stream `partition` of `seed`
std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t partition);

TimeSeries add_noise(const TimeSeries& ts, const NoiseSpec& spec);
FieldSeries add_noise(const FieldSeries& fs, const NoiseSpec& spec);

}  // namespace ensil
