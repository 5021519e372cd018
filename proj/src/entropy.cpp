#include "ensil/entropy.hpp"

#include "ensil/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ensil {

void save_trace_csv(const EntropyTrace& tr, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "t,S\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) f << fmt_num(tr.times[i]) << ',' << fmt_num(tr.S[i]) << '\n';
}

Mat clamp_columns(const Mat& values)
{
    Mat out = values;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        double floor = kClampRel * out.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = std::max(out(i, j), floor);
    }
    return out;
}

static double xlogx_rel(double c, double r)
{
    return c > 0 ? c * std::log(c / r) : 0.0;
}

double free_energy(const Vec& c, const Vec& c_ref)
{
    if (c.size() != c_ref.size()) throw std::invalid_argument("state and reference sizes differ");
    double F = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
        if (!(c_ref[j] > 0)) throw std::invalid_argument("reference state must be strictly positive");
        double cj = std::max(c[j], 0.0);
        F += xlogx_rel(cj, c_ref[j]) - cj + c_ref[j];
    }
    return F;
}

std::size_t reference_index(const TimeSeries& ts, double T_ref)
{
    if (ts.times.empty()) throw std::invalid_argument("empty series");
    const double tol = 1e-9 * std::max(1.0, std::abs(ts.times.back()));
    if (T_ref < ts.times.front() - tol || T_ref > ts.times.back() + tol)
        throw std::invalid_argument("T_ref " + fmt_num(T_ref) + " outside the series");
    auto it = std::lower_bound(ts.times.begin(), ts.times.end(), T_ref - tol);
    return static_cast<std::size_t>(it - ts.times.begin());
}

EntropyTrace free_energy_trace(const TimeSeries& ts, double T_ref)
{
    std::size_t r = reference_index(ts, T_ref);
    Mat c = clamp_columns(ts.values);
    Vec ref = c.row(r).transpose();
    EntropyTrace tr;
    tr.kind = EntropyKind::free_energy;
    tr.reference_state = ref;
    tr.times.assign(ts.times.begin(), ts.times.begin() + r + 1);
    tr.S.resize(r + 1);
    for (std::size_t i = 0; i <= r; ++i) tr.S[i] = free_energy(c.row(i).transpose(), ref);
    return tr;
}

static void check_positive_logs(const Mat& c)
{
    if (!(c.minCoeff() > 0)) throw std::domain_error("nonpositive concentration after clamping");
}

TermMatrix mm_terms(const TimeSeries& ts, const Vec& c_ref)
{
    if (ts.values.cols() != 4 || c_ref.size() != 4) throw std::invalid_argument("MM terms need (E, S, ES, P)");
    Mat c = clamp_columns(ts.values);
    check_positive_logs(c);
    const double Es = c_ref[0], Ss = c_ref[1], ESs = c_ref[2], Ps = c_ref[3];
    TermMatrix tm;
    tm.times = ts.times;
    tm.term_labels = {"k1+", "k1-", "k2+", "k2-"};
    tm.structural_zero.assign(4, false);
    tm.columns.resize(c.rows(), 4);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        double E = c(i, 0), S = c(i, 1), ES = c(i, 2), P = c(i, 3);
        double lnA = std::log(Es * Ss * ES / (E * S * ESs));
        double lnB = std::log(E * P * ESs / (Es * Ps * ES));
        tm.columns(i, 0) = E * S * lnA;
        tm.columns(i, 1) = -ES * lnA;
        tm.columns(i, 2) = ES * lnB;
        tm.columns(i, 3) = -E * P * lnB;
    }
    return tm;
}

TermMatrix schlogl_terms(const TimeSeries& ts, const Vec& c_ref)
{
    if (ts.values.cols() != 3 || c_ref.size() != 3) throw std::invalid_argument("Schlogl terms need (x, a, b)");
    Mat c = clamp_columns(ts.values);
    check_positive_logs(c);
    const double xs = c_ref[0], as = c_ref[1], bs = c_ref[2];
    TermMatrix tm;
    tm.times = ts.times;
    tm.term_labels = {"k1", "k2", "k3", "k4"};
    tm.structural_zero.assign(4, false);
    tm.columns.resize(c.rows(), 4);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        double x = c(i, 0), a = c(i, 1), b = c(i, 2);
        double lnC = std::log(a * xs / (x * as));
        double lnD = std::log(b * xs / (x * bs));
        tm.columns(i, 0) = -x * x * a * lnC;
        tm.columns(i, 1) = x * x * x * lnC;
        tm.columns(i, 2) = -b * lnD;
        tm.columns(i, 3) = x * lnD;
    }
    return tm;
}

double lorenz_entropy(const Vec& x)
{
    double S = 0.0;
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(3, x.size()); ++i) {
        double v = x[i];
        S += (v > 0 ? v * std::log(v) : 0.0) - v;
    }
    return S;
}

static std::array<int, 6> lorenz_columns(const TimeSeries& ts)
{
    std::array<int, 6> idx{};
    const char* names[6] = {"x1", "x2", "x3", "r1", "r2", "r3"};
    for (int k = 0; k < 6; ++k) {
        idx[k] = ts.index_of(names[k]);
        if (idx[k] < 0) throw std::invalid_argument(std::string("Lorenz data lacks species ") + names[k]);
    }
    return idx;
}

EntropyTrace lorenz_entropy_trace(const TimeSeries& ts)
{
    auto idx = lorenz_columns(ts);
    Mat c = clamp_columns(ts.values);
    EntropyTrace tr;
    tr.kind = EntropyKind::open_entropy;
    tr.times = ts.times;
    tr.S.resize(c.rows());
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        Vec x(3);
        x << c(i, idx[0]), c(i, idx[1]), c(i, idx[2]);
        tr.S[i] = lorenz_entropy(x);
    }
    return tr;
}

TermMatrix lorenz_terms(const TimeSeries& ts)
{
    auto idx = lorenz_columns(ts);
    Mat c = clamp_columns(ts.values);
    TermMatrix tm;
    tm.times = ts.times;
    for (int k = 1; k <= 10; ++k) tm.term_labels.push_back("k" + std::to_string(k));
    tm.structural_zero.assign(10, false);
    tm.columns.resize(c.rows(), 10);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        double x1 = c(i, idx[0]), x2 = c(i, idx[1]), x3 = c(i, idx[2]);
        double r1 = c(i, idx[3]), r2 = c(i, idx[4]), r3 = c(i, idx[5]);
        if (!(x1 > 0 && x2 > 0 && x3 > 0)) throw std::domain_error("nonpositive concentration after clamping");
        double l1 = std::log(x1), l2 = std::log(x2), l3 = std::log(x3);
        auto row = tm.columns.row(i);
        row[0] = r1 * x1 * x2 * l1;
        row[1] = r2 * x1 * x2 * l2;
        row[2] = r3 * x3 * l3;
        row[3] = x1 * x2 * x3 * (l3 - l2);
        row[4] = x2 * x3 * (l2 - l3);
        row[5] = -2.0 * x1 * x1 * l1;
        row[6] = -2.0 * x2 * x2 * l2;
        row[7] = -x2 * l2;
        row[8] = -x1 * x3 * l3;
        row[9] = -2.0 * x3 * x3 * l3;
    }
    return tm;
}

static bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> spectral_gradient(const std::vector<double>& f, double h)
{
    const int n = static_cast<int>(f.size());
    if (!is_pow2(n)) throw std::invalid_argument("spectral gradient needs a power-of-two length");
    RealFFT fft(n, 1);
    std::vector<std::complex<double>> F(fft.spec_size());
    fft.forward(f.data(), F.data());
    for (int k = 0; k < static_cast<int>(F.size()); ++k) {
        double w = (k == n / 2) ? 0.0 : wavenumber(k, n, h);
        F[k] *= std::complex<double>(0.0, w);
    }
    std::vector<double> out(n);
    fft.backward(F.data(), out.data());
    for (double& v : out) v /= n;
    return out;
}

std::pair<Field, Field> spectral_gradient(const Grid2D& g, const Field& f)
{
    g.check();
    if (f.data.size() != g.points()) throw std::invalid_argument("field does not match grid");
    RealFFT fft(g.nx, g.ny);
    const int nyc = fft.n1c();
    std::vector<std::complex<double>> F(fft.spec_size()), Gx(fft.spec_size()), Gy(fft.spec_size());
    fft.forward(f.data.data(), F.data());
    for (int i = 0; i < g.nx; ++i) {
        double kx = (i == g.nx / 2) ? 0.0 : wavenumber(i, g.nx, g.hx());
        for (int j = 0; j < nyc; ++j) {
            double ky = (j == g.ny / 2) ? 0.0 : wavenumber(j, g.ny, g.hy());
            std::size_t k = static_cast<std::size_t>(i) * nyc + j;
            Gx[k] = F[k] * std::complex<double>(0.0, kx);
            Gy[k] = F[k] * std::complex<double>(0.0, ky);
        }
    }
    Field dx, dy;
    dx.data.resize(g.points());
    dy.data.resize(g.points());
    fft.backward(Gx.data(), dx.data.data());
    fft.backward(Gy.data(), dy.data.data());
    const double norm = 1.0 / static_cast<double>(g.points());
    for (double& v : dx.data) v *= norm;
    for (double& v : dy.data) v *= norm;
    return {dx, dy};
}

Field spectral_filter(const Grid2D& g, const Field& rho, double frac)
{
    if (frac <= 0) return rho;
    RealFFT fft(g.nx, g.ny);
    const int nyc = fft.n1c();
    std::vector<std::complex<double>> F(fft.spec_size());
    fft.forward(rho.data.data(), F.data());
    const double kmax = std::numbers::pi / std::max(g.hx(), g.hy());
    for (int i = 0; i < g.nx; ++i) {
        double kx = wavenumber(i, g.nx, g.hx());
        for (int j = 0; j < nyc; ++j) {
            double ky = wavenumber(j, g.ny, g.hy());
            double r = std::sqrt(kx * kx + ky * ky) / (frac * kmax);
            F[static_cast<std::size_t>(i) * nyc + j] *= std::exp(-std::pow(r, 8));
        }
    }
    Field out;
    out.data.resize(g.points());
    fft.backward(F.data(), out.data.data());
    for (double& v : out.data) v /= static_cast<double>(g.points());
    return out;
}

static std::vector<double> clamp_field(const Field& f)
{
    double mx = 0.0;
    for (double v : f.data) mx = std::max(mx, std::abs(v));
    std::vector<double> c(f.data.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = std::max(f.data[k], kClampRel * mx);
    return c;
}

double pme_entropy(const Grid2D& g, const Field& rho, double m)
{
    if (m < 1.0) throw std::invalid_argument("PME entropy needs m >= 1");
    auto c = clamp_field(rho);
    double s = 0.0;
    for (double v : c) s += (m == 1.0) ? v * std::log(v) : std::pow(v, m) / (m - 1.0);
    s *= g.hx() * g.hy();
    if (!std::isfinite(s)) throw std::domain_error("non-finite PME entropy integrand");
    return s;
}

EntropyTrace pme_entropy_trace(const FieldSeries& fs, double m, double filter_frac)
{
    EntropyTrace tr;
    tr.kind = EntropyKind::pme_entropy;
    tr.times = fs.times;
    tr.S.resize(static_cast<Eigen::Index>(fs.fields.size()));
    for (std::size_t k = 0; k < fs.fields.size(); ++k)
        tr.S[k] = pme_entropy(fs.grid, spectral_filter(fs.grid, fs.fields[k], filter_frac), m);
    return tr;
}

TermMatrix pme_terms(const FieldSeries& fs, double m, double filter_frac)
{
    if (m < 1.0) throw std::invalid_argument("PME terms need m >= 1");
    TermMatrix tm;
    tm.times = fs.times;
    tm.term_labels = {"k1", "k2", "k3"};
    tm.structural_zero.assign(3, false);
    tm.columns.resize(static_cast<Eigen::Index>(fs.fields.size()), 3);
    const double cell = fs.grid.hx() * fs.grid.hy();
    for (std::size_t k = 0; k < fs.fields.size(); ++k) {
        Field r = spectral_filter(fs.grid, fs.fields[k], filter_frac);
        auto [gx, gy] = spectral_gradient(fs.grid, r);
        auto c = clamp_field(r);
        double s1 = 0, s2 = 0, s3 = 0;
        for (std::size_t q = 0; q < c.size(); ++q) {
            double w = (m == 2.0) ? c[q] : std::pow(c[q], 2.0 * m - 3.0);
            s1 += w * gx.data[q] * gx.data[q];
            s2 += w * gy.data[q] * gy.data[q];
            s3 += w * gx.data[q] * gy.data[q];
        }
        tm.columns(k, 0) = -m * m * s1 * cell;
        tm.columns(k, 1) = -m * m * s2 * cell;
        tm.columns(k, 2) = -m * m * s3 * cell;
        if (!tm.columns.row(k).allFinite()) throw std::domain_error("non-finite PME term integrand");
    }
    return tm;
}

double trapezoid(const Grid1D& g, const std::vector<double>& f)
{
    if (f.size() != static_cast<std::size_t>(g.n)) throw std::invalid_argument("grid mismatch in quadrature");
    if (g.n < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (int k = 1; k + 1 < g.n; ++k) s += f[k];
    return s * g.dx;
}

static double sample_std(const std::vector<double>& x)
{
    const double n = static_cast<double>(x.size());
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0));
}

double silverman_bandwidth(const std::vector<double>& samples)
{
    if (samples.size() < 2) throw std::invalid_argument("KDE needs at least two particles");
    double sd = sample_std(samples);
    if (!(sd > 0)) throw std::invalid_argument("zero-variance sample: pass an explicit bandwidth");
    return 1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

Grid1D fpe_grid(const std::vector<std::vector<double>>& snapshots, int n, double pad)
{
    double lo = INFINITY, hi = -INFINITY, h = 0.0;
    for (auto& s : snapshots) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        h = std::max(h, silverman_bandwidth(s));
    }
    Grid1D g;
    g.n = n;
    g.lo = lo - pad * h;
    g.dx = (hi + pad * h - g.lo) / (n - 1);
    return g;
}

DensityCurve kde(const std::vector<double>& samples, const Grid1D& grid, std::optional<double> bandwidth)
{
    if (samples.size() < 2) throw std::invalid_argument("KDE needs at least two particles");
    if (grid.n < 2 || !(grid.dx > 0)) throw std::invalid_argument("KDE grid needs >= 2 points");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    if (!(h > 0)) throw std::invalid_argument("KDE bandwidth must be positive");
    const int n = grid.n;
    // linear binning, then Gaussian smoothing in Fourier space
    std::vector<double> w(n, 0.0);
    for (double v : samples) {
        double pos = (v - grid.lo) / grid.dx;
        if (pos <= 0) {
            w[0] += 1.0;
            continue;
        }
        if (pos >= n - 1) {
            w[n - 1] += 1.0;
            continue;
        }
        int i = static_cast<int>(pos);
        double f = pos - i;
        w[i] += 1.0 - f;
        w[i + 1] += f;
    }
    RealFFT fft(n, 1);
    std::vector<std::complex<double>> F(fft.spec_size());
    fft.forward(w.data(), F.data());
    for (int k = 0; k < static_cast<int>(F.size()); ++k) {
        double om = wavenumber(k, n, grid.dx);
        F[k] *= std::exp(-0.5 * om * om * h * h);
    }
    DensityCurve out;
    out.grid = grid;
    out.bandwidth = h;
    out.p.resize(n);
    fft.backward(F.data(), out.p.data());
    for (double& v : out.p) v = std::max(v, 0.0);
    double Z = trapezoid(grid, out.p);
    if (!(Z > 0)) throw std::runtime_error("KDE produced an empty density");
    for (double& v : out.p) v /= Z;
    return out;
}

double shannon_entropy(const DensityCurve& p)
{
    std::vector<double> f(p.p.size());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = p.p[k] > 0 ? -p.p[k] * std::log(p.p[k]) : 0.0;
    return trapezoid(p.grid, f);
}

std::vector<double> fpe_flux(const DensityCurve& p, const Drift& th, double D)
{
    auto px = spectral_gradient(p.p, p.grid.dx);
    std::vector<double> J(p.p.size());
    for (int k = 0; k < p.grid.n; ++k) {
        double x = p.grid.x(k);
        J[k] = (th[0] * x * x * x + th[1] * x + th[2]) * p.p[k] - D * px[k];
    }
    return J;
}

DensityCurve stationary_density(const Drift& th, double D, const Grid1D& grid)
{
    if (!(th[0] < 0)) throw std::invalid_argument("stationary density needs theta3 < 0 (confining drift)");
    if (!(D > 0)) throw std::invalid_argument("stationary density needs D > 0");
    std::vector<double> e(grid.n);
    double mx = -INFINITY;
    for (int k = 0; k < grid.n; ++k) {
        double x = grid.x(k);
        double V = -(th[0] / 4.0) * x * x * x * x - (th[1] / 2.0) * x * x - th[2] * x;
        e[k] = -V / D;
        mx = std::max(mx, e[k]);
    }
    DensityCurve out;
    out.grid = grid;
    out.p.resize(grid.n);
    for (int k = 0; k < grid.n; ++k) out.p[k] = std::exp(e[k] - mx);
    double Z = trapezoid(grid, out.p);
    for (double& v : out.p) v /= Z;
    return out;
}

static std::vector<double> clamped(const std::vector<double>& p)
{
    double mx = *std::max_element(p.begin(), p.end());
    std::vector<double> c(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) c[k] = std::max(p[k], kClampRel * mx);
    return c;
}

TermMatrix fpe_entropy_balance_terms(const std::vector<DensityCurve>& pd, const std::vector<double>& times)
{
    if (pd.size() != times.size()) throw std::invalid_argument("one density per time required");
    TermMatrix tm;
    tm.times = times;
    tm.term_labels = {"theta3", "theta1", "theta0", "D"};
    tm.structural_zero = {false, false, true, false};
    tm.columns.resize(static_cast<Eigen::Index>(pd.size()), 4);
    for (std::size_t i = 0; i < pd.size(); ++i) {
        const auto& g = pd[i].grid;
        if (g.n != pd[0].grid.n || g.lo != pd[0].grid.lo || g.dx != pd[0].grid.dx)
            throw std::invalid_argument("densities must share one grid");
        auto px = spectral_gradient(pd[i].p, g.dx);
        auto pc = clamped(pd[i].p);
        std::vector<double> f3(g.n), f1(g.n), f0(g.n), fd(g.n);
        for (int k = 0; k < g.n; ++k) {
            double x = g.x(k);
            f3[k] = -x * x * x * px[k];
            f1[k] = -x * px[k];
            f0[k] = -px[k];
            fd[k] = px[k] * px[k] / pc[k];
        }
        tm.columns(i, 0) = trapezoid(g, f3);
        tm.columns(i, 1) = trapezoid(g, f1);
        tm.columns(i, 2) = trapezoid(g, f0);
        tm.columns(i, 3) = trapezoid(g, fd);
    }
    return tm;
}

static void same_grid(const DensityCurve& a, const DensityCurve& b)
{
    if (a.grid.n != b.grid.n || a.grid.lo != b.grid.lo || a.grid.dx != b.grid.dx || a.p.size() != b.p.size())
        throw std::invalid_argument("grid mismatch");
}

double relative_entropy(const DensityCurve& p, const DensityCurve& p_ss)
{
    same_grid(p, p_ss);
    auto qc = clamped(p_ss.p);
    std::vector<double> f(p.p.size());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = p.p[k] > 0 ? p.p[k] * std::log(p.p[k] / qc[k]) : 0.0;
    return trapezoid(p.grid, f);
}

static std::vector<double> grad_log(const DensityCurve& p)
{
    auto c = clamped(p.p);
    std::vector<double> l(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) l[k] = std::log(c[k]);
    return spectral_gradient(l, p.grid.dx);
}

double free_energy_dissipation(const DensityCurve& p, const std::vector<double>& J, const DensityCurve& p_ss)
{
    same_grid(p, p_ss);
    if (J.size() != p.p.size()) throw std::invalid_argument("grid mismatch");
    auto gp = grad_log(p), gs = grad_log(p_ss);
    std::vector<double> f(J.size());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = J[k] * (gp[k] - gs[k]);
    return trapezoid(p.grid, f);
}

Decomposition entropy_decomposition(const DensityCurve& p, const std::vector<double>& J, const DensityCurve& p_ss)
{
    same_grid(p, p_ss);
    if (J.size() != p.p.size()) throw std::invalid_argument("grid mismatch");
    auto gp = grad_log(p), gs = grad_log(p_ss);
    std::vector<double> ex(J.size()), na(J.size()), tot(J.size());
    for (std::size_t k = 0; k < J.size(); ++k) {
        ex[k] = -J[k] * gs[k];
        na[k] = J[k] * (gs[k] - gp[k]);
        tot[k] = -J[k] * gp[k];
    }
    return {trapezoid(p.grid, ex), trapezoid(p.grid, na), trapezoid(p.grid, tot)};
}

std::vector<double> density_moments(const DensityCurve& p, int qmax)
{
    std::vector<double> m(qmax + 1), f(p.p.size());
    for (int q = 0; q <= qmax; ++q) {
        for (int k = 0; k < p.grid.n; ++k) f[k] = std::pow(p.grid.x(k), q) * p.p[k];
        m[q] = trapezoid(p.grid, f);
    }
    return m;
}

std::pair<double, double> mc_expectation(const std::vector<double>& samples, const std::function<double(double)>& f)
{
    if (samples.size() < 2) throw std::invalid_argument("Monte-Carlo estimate needs >= 2 samples");
    std::vector<double> v(samples.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(samples[k]);
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    return {mean, sample_std(v) / std::sqrt(static_cast<double>(v.size()))};
}

}  // namespace ensil
