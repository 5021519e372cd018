#include "ensil/models.hpp"

#include "ensil/spectral.hpp"

#include <json.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace ensil {

void PMEParams::check() const
{
    if (m < 1.0) throw std::invalid_argument("PME exponent m must be >= 1");
    if (k1 < 0 || k2 < 0 || 4.0 * k1 * k2 < k3 * k3 - 1e-12)
        throw std::invalid_argument("PME diffusion matrix is not positive semidefinite");
}

void mass_action_rhs(const ReactionNetwork& net, const double* c, double* dcdt)
{
    const std::size_t n = net.n_species();
    for (std::size_t j = 0; j < n; ++j) dcdt[j] = 0.0;
    for (auto& r : net.reactions) {
        double fwd = r.k_fwd, bwd = r.k_bwd;
        for (std::size_t j = 0; j < n; ++j) {
            for (int q = 0; q < r.nu_fwd[j]; ++q) fwd *= c[j];
            for (int q = 0; q < r.nu_bwd[j]; ++q) bwd *= c[j];
        }
        double rate = fwd - bwd;
        for (std::size_t j = 0; j < n; ++j) dcdt[j] += (r.nu_bwd[j] - r.nu_fwd[j]) * rate;
    }
    for (std::size_t j = 0; j < n; ++j)
        if (net.chemostat_mask[j]) dcdt[j] = 0.0;
}

TimeSeries integrate_mass_action(const ReactionNetwork& net, const Vec& ic, double dt, double t_end, int substeps)
{
    net.check();
    const auto n = static_cast<Eigen::Index>(net.n_species());
    if (ic.size() != n) throw std::invalid_argument("initial condition size mismatch");
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(ic[j] >= 0)) throw std::invalid_argument("initial condition must be nonnegative");
    if (!(dt > 0) || !(t_end >= 0)) throw std::invalid_argument("dt must be positive");
    if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
    const long steps = std::lround(t_end / dt);
    const double h = dt / substeps;

    TimeSeries ts;
    ts.species_names = net.species;
    ts.values.resize(steps + 1, n);
    ts.times.resize(steps + 1);
    Vec y = ic;
    for (Eigen::Index j = 0; j < n; ++j)
        if (net.chemostat_mask[j]) y[j] = net.chemostat_values[j];
    Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
    ts.values.row(0) = y.transpose();
    ts.times[0] = 0.0;
    for (long s = 1; s <= steps; ++s) {
        for (int sub = 0; sub < substeps; ++sub) {
            mass_action_rhs(net, y.data(), k1.data());
            tmp = y + 0.5 * h * k1;
            mass_action_rhs(net, tmp.data(), k2.data());
            tmp = y + 0.5 * h * k2;
            mass_action_rhs(net, tmp.data(), k3.data());
            tmp = y + h * k3;
            mass_action_rhs(net, tmp.data(), k4.data());
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!y.allFinite())
            throw std::runtime_error("non-finite state at t = " + fmt_num(s * dt) + " (reduce dt)");
        ts.values.row(s) = y.transpose();
        ts.times[s] = s * dt;
    }
    return ts;
}

static Reaction reaction(std::size_t n, std::vector<std::pair<int, int>> lhs, std::vector<std::pair<int, int>> rhs,
                         double kf, double kb = 0.0)
{
    Reaction r;
    r.nu_fwd.assign(n, 0);
    r.nu_bwd.assign(n, 0);
    for (auto [j, q] : lhs) r.nu_fwd[j] = q;
    for (auto [j, q] : rhs) r.nu_bwd[j] = q;
    r.k_fwd = kf;
    r.k_bwd = kb;
    return r;
}

ReactionNetwork build_mm()
{
    ReactionNetwork net;
    net.species = {"E", "S", "ES", "P"};
    enum { E, S, ES, P };
    net.reactions.push_back(reaction(4, {{E, 1}, {S, 1}}, {{ES, 1}}, 1.0, 10.0));
    net.reactions.push_back(reaction(4, {{ES, 1}}, {{E, 1}, {P, 1}}, 1.0, 0.0));
    net.chemostat_mask.assign(4, false);
    net.chemostat_values.assign(4, 0.0);
    return net;
}

ReactionNetwork build_schlogl()
{
    ReactionNetwork net;
    net.species = {"x", "a", "b"};
    enum { X, A, B };
    net.reactions.push_back(reaction(3, {{X, 2}, {A, 1}}, {{X, 3}}, 1.0, 1.0));
    net.reactions.push_back(reaction(3, {{B, 1}}, {{X, 1}}, 1.0, 4.0));
    net.chemostat_mask.assign(3, false);
    net.chemostat_values.assign(3, 0.0);
    return net;
}

namespace {
constexpr double kLorenzShift = 1e4;
constexpr double kLorenzScale = 100.0;
constexpr double kLorenzRho = 28.0;
const double kLorenzR[3] = {100.0, 1.0, 1.0 + (266.0 - 2.66 * kLorenzRho) / kLorenzShift};
}  // namespace

ReactionNetwork build_lorenz()
{
    ReactionNetwork net;
    net.species = {"x1", "x2", "x3", "r1", "r2", "r3"};
    enum { X1, X2, X3, R1, R2, R3 };
    const std::size_t n = 6;
    auto& rs = net.reactions;
    rs.push_back(reaction(n, {{R1, 1}, {X1, 1}, {X2, 1}}, {{X1, 2}, {X2, 1}}, 0.001));
    rs.push_back(reaction(n, {{R2, 1}, {X1, 1}, {X2, 1}}, {{X1, 1}, {X2, 2}}, 1.0));
    rs.push_back(reaction(n, {{R3, 1}, {X3, 1}}, {{X3, 2}}, 10000.0));
    rs.push_back(reaction(n, {{X1, 1}, {X2, 1}, {X3, 1}}, {{X1, 1}, {X3, 2}}, 0.0001));
    rs.push_back(reaction(n, {{X2, 1}, {X3, 1}}, {{X2, 2}}, 1.0));
    rs.push_back(reaction(n, {{X1, 2}}, {}, 0.05));
    rs.push_back(reaction(n, {{X2, 2}}, {}, 0.005));
    rs.push_back(reaction(n, {{X2, 1}}, {}, 9900.0));
    rs.push_back(reaction(n, {{X1, 1}, {X3, 1}}, {{X1, 1}}, 1.0));
    rs.push_back(reaction(n, {{X3, 2}}, {}, 0.0133));
    net.chemostat_mask = {false, false, false, true, true, true};
    net.chemostat_values = {0.0, 0.0, 0.0, kLorenzR[0], kLorenzR[1], kLorenzR[2]};
    return net;
}

std::vector<double> mm_rates(const ReactionNetwork& net)
{
    return {net.reactions.at(0).k_fwd, net.reactions.at(0).k_bwd, net.reactions.at(1).k_fwd, net.reactions.at(1).k_bwd};
}

std::vector<double> schlogl_rates(const ReactionNetwork& net) { return mm_rates(net); }

std::vector<double> lorenz_rates(const ReactionNetwork& net)
{
    std::vector<double> k;
    for (auto& r : net.reactions) k.push_back(r.k_fwd);
    return k;
}

Vec lorenz_state_from_xyz(double X, double Y, double Z)
{
    Vec c(6);
    c << kLorenzShift + kLorenzScale * X, kLorenzShift + kLorenzScale * Y,
        kLorenzShift + kLorenzScale * (Z - kLorenzRho), kLorenzR[0], kLorenzR[1], kLorenzR[2];
    return c;
}

Field gaussian_bump(const Grid2D& g, double x0, double y0, double s2)
{
    Field f;
    f.data.assign(g.points(), 0.0);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            double dx = g.x(i) - x0, dy = g.y(j) - y0;
            f.at(g, i, j) = std::exp(-(dx * dx + dy * dy) / s2);
        }
    return f;
}

Field pme_three_bumps(const Grid2D& g)
{
    Field f;
    f.data.assign(g.points(), 0.0);
    const double centres[3][2] = {{-2, -2}, {-2, 2}, {2, -2}};
    for (auto& c : centres) {
        Field b = gaussian_bump(g, c[0], c[1], 1.0);
        for (std::size_t k = 0; k < f.data.size(); ++k) f.data[k] += b.data[k];
    }
    for (double& v : f.data) v /= 3.0 * std::numbers::pi;
    return f;
}

namespace {

class PMEOperator {
public:
    PMEOperator(const PMEParams& p, const Grid2D& g) : p_(p), g_(g), fft_(g.nx, g.ny)
    {
        const int nyc = fft_.n1c();
        symbol_.resize(fft_.spec_size());
        for (int i = 0; i < g.nx; ++i) {
            double kx = wavenumber(i, g.nx, g.hx());
            bool nyq_x = (i == g.nx / 2);
            for (int j = 0; j < nyc; ++j) {
                double ky = wavenumber(j, g.ny, g.hy());
                bool nyq_y = (j == g.ny / 2);
                double mixed = (nyq_x || nyq_y) ? 0.0 : p.k3 * kx * ky;
                symbol_[static_cast<std::size_t>(i) * nyc + j] = -(p.k1 * kx * kx + p.k2 * ky * ky + mixed);
            }
        }
        pw_.resize(fft_.real_size());
        spec_.resize(fft_.spec_size());
    }

    void apply(const std::vector<double>& rho, std::vector<double>& out)
    {
        const double m = p_.m;
        for (std::size_t k = 0; k < rho.size(); ++k) {
            double r = rho[k];
            pw_[k] = (m == 2.0) ? r * std::abs(r) : std::copysign(std::pow(std::abs(r), m), r);
        }
        fft_.forward(pw_.data(), spec_.data());
        for (std::size_t k = 0; k < spec_.size(); ++k) spec_[k] *= symbol_[k];
        spec_[0] = 0.0;
        out.resize(rho.size());
        fft_.backward(spec_.data(), out.data());
        const double norm = 1.0 / static_cast<double>(fft_.real_size());
        for (double& v : out) v *= norm;
    }

private:
    PMEParams p_;
    Grid2D g_;
    RealFFT fft_;
    std::vector<double> symbol_;
    std::vector<double> pw_;
    std::vector<std::complex<double>> spec_;
};

}  // namespace

FieldSeries solve_pme(const PMEParams& p, const Grid2D& g, const Field& rho0, double dt, double t_end, int substeps)
{
    p.check();
    g.check();
    if (rho0.data.size() != g.points()) throw std::invalid_argument("initial field does not match grid");
    for (double v : rho0.data)
        if (!(v >= 0)) throw std::invalid_argument("initial density must be nonnegative");
    if (!(dt > 0) || substeps < 1) throw std::invalid_argument("bad PME time step");

    PMEOperator op(p, g);
    const long steps = std::lround(t_end / dt);
    const double h = dt / substeps;
    FieldSeries out;
    out.grid = g;
    nlohmann::json params = {{"m", p.m}, {"k1", p.k1}, {"k2", p.k2}, {"k3", p.k3}, {"dt", dt}, {"substeps", substeps}};
    out.params_json = params.dump();
    out.times.push_back(0.0);
    out.fields.push_back(rho0);

    std::vector<double> y = rho0.data, a, b, c, d, tmp(y.size());
    const double mass0 = grid_integral(g, rho0);
    for (long s = 1; s <= steps; ++s) {
        for (int sub = 0; sub < substeps; ++sub) {
            op.apply(y, a);
            for (std::size_t k = 0; k < y.size(); ++k) tmp[k] = y[k] + 0.5 * h * a[k];
            op.apply(tmp, b);
            for (std::size_t k = 0; k < y.size(); ++k) tmp[k] = y[k] + 0.5 * h * b[k];
            op.apply(tmp, c);
            for (std::size_t k = 0; k < y.size(); ++k) tmp[k] = y[k] + h * c[k];
            op.apply(tmp, d);
            for (std::size_t k = 0; k < y.size(); ++k) y[k] += h / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
        }
        for (double v : y)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite PME field at t = " + fmt_num(s * dt));
        Field f{y};
        if (grid_integral(g, f) < 0 || mass0 < 0) throw std::runtime_error("negative PME mass");
        out.times.push_back(s * dt);
        out.fields.push_back(std::move(f));
    }
    return out;
}

std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t partition)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(partition), static_cast<std::uint32_t>(partition >> 32)};
    return std::mt19937_64(seq);
}

ParticleEnsemble simulate_langevin(const DoubleWellParams& p, const LangevinOptions& opt)
{
    if (opt.n_samples < 1) throw std::invalid_argument("need at least one particle");
    if (!(opt.dt > 0) || !(opt.sample_dt > 0)) throw std::invalid_argument("time steps must be positive");
    if (p.a < 0 || p.sigma < 0) throw std::invalid_argument("double-well needs a >= 0 and sigma >= 0");
    const long per_sample = std::lround(opt.sample_dt / opt.dt);
    if (per_sample < 1 || std::abs(per_sample * opt.dt - opt.sample_dt) > 1e-9 * opt.sample_dt)
        throw std::invalid_argument("sample interval must be a multiple of the step");
    const long n_snap = std::lround(opt.t_end / opt.sample_dt);
    const int parts = std::max(1, opt.partitions);
    const std::size_t N = opt.n_samples;

    ParticleEnsemble pe;
    pe.sigma_used = p.sigma;
    pe.seed = opt.seed;
    pe.times.resize(n_snap + 1);
    pe.samples.assign(n_snap + 1, std::vector<double>(N));
    for (long k = 0; k <= n_snap; ++k) pe.times[k] = k * opt.sample_dt;

    const double sq = p.sigma * std::sqrt(opt.dt);
    auto work = [&](int part) {
        std::size_t lo = N * part / parts, hi = N * (part + 1) / parts;
        auto rng = seeded_rng(opt.seed, static_cast<std::uint64_t>(part));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::vector<double> x(hi - lo, 0.0);
        if (opt.x0)
            for (auto& v : x) v = opt.x0(rng);
        for (std::size_t q = lo; q < hi; ++q) pe.samples[0][q] = x[q - lo];
        for (long k = 1; k <= n_snap; ++k) {
            for (long s = 0; s < per_sample; ++s)
                for (auto& v : x) v += p.drift(v) * opt.dt + sq * nd(rng);
            for (std::size_t q = lo; q < hi; ++q) {
                if (!std::isfinite(x[q - lo])) throw std::runtime_error("Langevin path diverged");
                pe.samples[k][q] = x[q - lo];
            }
        }
    };
    const int jobs = std::max(1, std::min(opt.jobs, parts));
    if (jobs == 1) {
        for (int part = 0; part < parts; ++part) work(part);
    } else {
        std::vector<std::exception_ptr> errs(parts);
        for (int base = 0; base < parts; base += jobs) {
            std::vector<std::thread> th;
            for (int part = base; part < std::min(parts, base + jobs); ++part)
                th.emplace_back([&, part] {
                    try {
                        work(part);
                    } catch (...) {
                        errs[part] = std::current_exception();
                    }
                });
            for (auto& t : th) t.join();
        }
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return pe;
}

TimeSeries add_noise(const TimeSeries& ts, const NoiseSpec& spec)
{
    if (spec.epsilon < 0) throw std::invalid_argument("noise epsilon must be >= 0");
    TimeSeries out = ts;
    if (spec.epsilon == 0.0) return out;
    auto rng = seeded_rng(spec.seed, 0);
    std::normal_distribution<double> nd(0.0, spec.sigma);
    for (Eigen::Index j = 0; j < ts.values.cols(); ++j) {
        double scale = ts.values.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < ts.values.rows(); ++i) {
            double xi = nd(rng);
            if (spec.kind == NoiseKind::additive) out.values(i, j) += spec.epsilon * scale * xi;
            else out.values(i, j) *= 1.0 + spec.epsilon * xi;
        }
    }
    return out;
}

FieldSeries add_noise(const FieldSeries& fs, const NoiseSpec& spec)
{
    if (spec.epsilon < 0) throw std::invalid_argument("noise epsilon must be >= 0");
    FieldSeries out = fs;
    if (spec.epsilon == 0.0) return out;
    auto rng = seeded_rng(spec.seed, 0);
    std::normal_distribution<double> nd(0.0, spec.sigma);
    for (auto& f : out.fields) {
        double scale = 0.0;
        for (double v : f.data) scale = std::max(scale, std::abs(v));
        for (double& v : f.data) {
            double xi = nd(rng);
            if (spec.kind == NoiseKind::additive) v += spec.epsilon * scale * xi;
            else v *= 1.0 + spec.epsilon * xi;
        }
    }
    return out;
}

}  // namespace ensil
