#include "ensil/experiment.hpp"

#include "ensil/legendre.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

namespace ensil {

namespace fs = std::filesystem;

std::string PointSpec::label() const
{
    if (field.empty()) return sweep;
    std::string v;
    for (char c : value) v += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return sweep + "_" + v;
}

std::vector<PointSpec> expand(const ExperimentConfig& cfg, const RunOptions& opt)
{
    auto finish = [&](KeyValues kv) {
        if (opt.seed) kv["seed"] = std::to_string(*opt.seed);
        if (opt.out) kv["output_dir"] = *opt.out;
        return resolve(kv);
    };
    std::vector<PointSpec> pts;
    if (cfg.sweeps.empty()) {
        PointSpec p;
        p.settings = finish(merged(cfg.base, opt.overrides));
        pts.push_back(p);
        return pts;
    }
    for (auto& sw : cfg.sweeps)
        for (auto& v : sw.values) {
            KeyValues kv = merged(merged(cfg.base, opt.overrides), sw.overrides);
            kv[sw.field] = v;
            PointSpec p;
            p.sweep = sw.name;
            p.field = sw.field;
            p.value = v;
            p.settings = finish(kv);
            pts.push_back(p);
        }
    return pts;
}

static int substeps_for(const Settings& s)
{
    if (s.substep <= 0) return 1;
    return std::max(1, static_cast<int>(std::lround(s.dt / s.substep)));
}

static ReactionNetwork network_for(const Settings& s)
{
    ReactionNetwork net;
    if (s.benchmark == "mm") net = build_mm();
    else if (s.benchmark == "schlogl") net = build_schlogl();
    else net = build_lorenz();
    if (s.rates) {
        const auto& k = *s.rates;
        if (s.benchmark == "lorenz") {
            for (std::size_t j = 0; j < 10; ++j) net.reactions[j].k_fwd = k[j];
        } else {
            net.reactions[0].k_fwd = k[0];
            net.reactions[0].k_bwd = k[1];
            net.reactions[1].k_fwd = k[2];
            net.reactions[1].k_bwd = k[3];
        }
    }
    return net;
}

std::vector<double> true_theta(const Settings& s)
{
    if (s.benchmark == "mm") return mm_rates(network_for(s));
    if (s.benchmark == "schlogl") return schlogl_rates(network_for(s));
    if (s.benchmark == "lorenz") return lorenz_rates(network_for(s));
    if (s.benchmark == "pme") return {s.pme.k1, s.pme.k2, s.pme.k3};
    return {-s.dw.a, s.dw.b, s.dw.c, s.dw.D()};
}

static TimeSeries window(const TimeSeries& ts, double t0)
{
    std::size_t first = 0;
    while (first < ts.times.size() && ts.times[first] < t0 - 1e-12 * std::max(1.0, t0)) ++first;
    TimeSeries out;
    out.species_names = ts.species_names;
    out.times.assign(ts.times.begin() + first, ts.times.end());
    out.values = ts.values.bottomRows(ts.values.rows() - static_cast<Eigen::Index>(first));
    return out;
}

Dataset simulate_point(const Settings& s, int repeat)
{
    Dataset d;
    NoiseSpec ns = s.noise;
    ns.seed = s.seed + static_cast<std::uint64_t>(repeat);
    if (s.benchmark == "mm" || s.benchmark == "schlogl" || s.benchmark == "lorenz") {
        ReactionNetwork net = network_for(s);
        Vec ic;
        if (s.benchmark == "lorenz" && s.ic.size() != 6) ic = lorenz_state_from_xyz(s.xyz[0], s.xyz[1], s.xyz[2]);
        else ic = Eigen::Map<const Vec>(s.ic.data(), static_cast<Eigen::Index>(s.ic.size()));
        TimeSeries full = integrate_mass_action(net, ic, s.dt, s.t_end, substeps_for(s));
        d.clean = s.t_start > 0 ? window(full, s.t_start) : full;
        d.ts = add_noise(d.clean, ns);
    } else if (s.benchmark == "pme") {
        Field rho0 = pme_three_bumps(s.grid);
        FieldSeries clean = solve_pme(s.pme, s.grid, rho0, s.dt, s.t_end, substeps_for(s));
        d.fields = add_noise(clean, ns);
    } else {
        LangevinOptions lo;
        lo.n_samples = s.particles;
        lo.dt = s.em_dt;
        lo.sample_dt = s.dt;
        lo.t_end = s.t_end;
        lo.seed = s.seed + static_cast<std::uint64_t>(repeat);
        lo.partitions = s.partitions;
        d.ensemble = simulate_langevin(s.dw, lo);
    }
    return d;
}

void save_dataset(const Settings& s, const Dataset& d, const std::string& dir, bool raw)
{
    fs::create_directories(dir);
    if (s.benchmark == "pme") {
        if (raw) save_field_series(d.fields, (fs::path(dir) / "fields").string());
    } else if (s.benchmark == "doublewell") {
        if (raw) save_ensemble_csv(d.ensemble, (fs::path(dir) / "ensemble.csv").string());
    } else {
        save_csv(d.ts, (fs::path(dir) / "series.csv").string());
        save_csv(d.clean, (fs::path(dir) / "clean.csv").string());
    }
}

Dataset load_dataset(const Settings& s, const std::string& dir)
{
    Dataset d;
    if (s.benchmark == "pme") {
        d.fields = load_field_series((fs::path(dir) / "fields").string());
    } else if (s.benchmark == "doublewell") {
        d.ensemble = load_ensemble_csv((fs::path(dir) / "ensemble.csv").string());
    } else {
        d.ts = load_csv((fs::path(dir) / "series.csv").string());
        auto v = validate(d.ts);
        if (!v.empty()) throw std::runtime_error(dir + "/series.csv: " + v.front().what);
        d.clean = d.ts;
    }
    return d;
}

static double nan() { return std::numeric_limits<double>::quiet_NaN(); }

static EnsilProblem ode_problem(const Settings& s, const TimeSeries& data)
{
    EnsilProblem prob;
    TimeSeries ts = denoise(data, s.denoise_order);
    if (s.benchmark == "lorenz") {
        prob.entropy = lorenz_entropy_trace(ts);
        prob.terms = lorenz_terms(ts);
    } else {
        double Tref = s.t_ref ? *s.t_ref : ts.times.back();
        prob.entropy = free_energy_trace(ts, Tref);
        TimeSeries head = ts;
        const auto r = static_cast<Eigen::Index>(prob.entropy.times.size());
        head.times.resize(r);
        head.values = ts.values.topRows(r);
        prob.terms = s.benchmark == "mm" ? mm_terms(head, *prob.entropy.reference_state)
                                         : schlogl_terms(head, *prob.entropy.reference_state);
    }
    prob.sign_mode = s.sign_mode;
    prob.weights = s.weights;
    prob.legendre_order = s.legendre_order;
    prob.apply_constraint_loss = s.long_time;
    prob.free_offset = s.free_offset;
    prob.lower_bounds = Vec::Zero(prob.terms.columns.cols());
    prob.theta_true = true_theta(s);
    return prob;
}

static std::vector<int> species_indices(const TimeSeries& ts, const std::vector<std::string>& names,
                                        const std::string& key)
{
    std::vector<int> idx;
    for (auto& n : names) {
        int j = ts.index_of(n);
        if (j < 0) throw ConfigError("field '" + key + "': unknown species '" + n + "'");
        idx.push_back(j);
    }
    return idx;
}

static bool same_names(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    return a == b;
}

// Rate constants from integral-SINDy coefficients. Conserved totals make the full monomial library
// collinear, so a reduced library over independent species is supported as well.
static FitResult sindy_fit(const Settings& s, const TimeSeries& ts)
{
    FitResult r;
    r.theta_true = true_theta(s);
    r.loss_data = r.loss_thermo = r.loss_constraint = nan();
    r.converged = true;
    std::vector<std::string> lib = s.sindy_library.empty() ? ts.species_names : s.sindy_library;
    const std::vector<int> lib_idx = species_indices(ts, lib, "sindy.library");
    if (s.benchmark == "schlogl") {
        SindyModel m = fit_integral_sindy(ts, s.sindy, {0}, lib_idx);
        if (same_names(lib, {"x", "a", "b"})) {
            r.theta_hat = {m.coeff(0, {2, 1, 0}), -m.coeff(0, {3, 0, 0}), m.coeff(0, {0, 0, 1}), -m.coeff(0, {1, 0, 0})};
        } else if (same_names(lib, {"x", "a"})) {
            // b = total - x - a
            const double ca = m.coeff(0, {0, 1});
            r.theta_hat = {m.coeff(0, {2, 1}), -m.coeff(0, {3, 0}), -ca, -m.coeff(0, {1, 0}) + ca};
        } else {
            throw ConfigError("field 'sindy.library': Schlogl supports 'x a b' or 'x a'");
        }
    } else {
        std::vector<std::string> eqs = s.sindy_equations.empty() ? std::vector<std::string>{"S", "P"} : s.sindy_equations;
        const std::vector<int> idx = species_indices(ts, eqs, "sindy.equations");
        SindyModel m = fit_integral_sindy(ts, s.sindy, idx, lib_idx);
        std::vector<std::vector<double>> est(4);
        if (same_names(lib, {"E", "S", "ES", "P"})) {
            const std::vector<int> ES_{1, 1, 0, 0}, C_{0, 0, 1, 0}, EP_{1, 0, 0, 1};
            for (std::size_t e = 0; e < eqs.size(); ++e) {
                const int c = static_cast<int>(e);
                if (eqs[e] == "S") {
                    est[0].push_back(-m.coeff(c, ES_));
                    est[1].push_back(m.coeff(c, C_));
                } else if (eqs[e] == "P") {
                    est[2].push_back(m.coeff(c, C_));
                    est[3].push_back(-m.coeff(c, EP_));
                } else if (eqs[e] == "E") {
                    est[0].push_back(-m.coeff(c, ES_));
                    est[3].push_back(-m.coeff(c, EP_));
                } else {
                    est[0].push_back(m.coeff(c, ES_));
                    est[3].push_back(m.coeff(c, EP_));
                }
            }
        } else if (same_names(lib, {"S", "P"})) {
            // E and ES eliminated through the two conserved totals
            for (std::size_t e = 0; e < eqs.size(); ++e) {
                const int c = static_cast<int>(e);
                if (eqs[e] == "S") {
                    est[0].push_back(-m.coeff(c, {2, 0}));
                    est[1].push_back(-m.coeff(c, {0, 1}));
                } else if (eqs[e] == "P") {
                    est[2].push_back(-m.coeff(c, {1, 0}));
                    est[3].push_back(-m.coeff(c, {0, 2}));
                } else {
                    throw ConfigError("field 'sindy.equations': library 'S P' fits only the S and P equations");
                }
            }
        } else {
            throw ConfigError("field 'sindy.library': MM supports 'E S ES P' or 'S P'");
        }
        if (s.sindy_entropy_row) {
            EnsilProblem prob = ode_problem(s, ts);
            Vec th = least_squares_theta(prob);
            for (int j = 0; j < 4; ++j) est[j].push_back(th[j]);
        }
        for (auto& v : est) {
            double sum = 0.0;
            for (double x : v) sum += x;
            r.theta_hat.push_back(v.empty() ? nan() : sum / v.size());
        }
    }
    bool finite = std::all_of(r.theta_hat.begin(), r.theta_hat.end(), [](double v) { return std::isfinite(v); });
    if (finite) r.mre_percent = mre(r.theta_hat, *r.theta_true);
    return r;
}

FitOutput fit_point(const Settings& s, const Dataset& d, const std::string& method)
{
    FitOutput out;
    if (method == "sindy") {
        out.fit = sindy_fit(s, d.ts);
        return out;
    }
    if (s.benchmark == "mm" || s.benchmark == "schlogl" || s.benchmark == "lorenz") {
        EnsilProblem prob = ode_problem(s, d.ts);
        out.fit = fit_ensil(prob);
        out.trace = prob.entropy;
        out.terms = prob.terms;
    } else if (s.benchmark == "pme") {
        PmeFitOptions po;
        po.legendre_order = s.legendre_order;
        po.filter_frac = s.filter_frac;
        po.weights = s.weights;
        po.theta_true = true_theta(s);
        out.fit = fit_pme(d.fields, s.pme.m, po);
        out.trace = pme_entropy_trace(d.fields, s.pme.m, s.filter_frac);
    } else {
        FpeOptions fo;
        fo.t_start = s.fpe_t_start;
        fo.grid_points = s.grid_points;
        fo.bandwidth_factor = s.bandwidth_factor;
        fo.extrapolate = s.extrapolate;
        fo.legendre_order = s.legendre_order;
        fo.weights = s.weights;
        fo.stage2 = s.stage2;
        fo.theta_true = true_theta(s);
        FpeFit f = fit_fpe(d.ensemble, fo);
        out.fit = f.result;
        out.trace = f.entropy;
        out.terms = f.terms;
    }
    return out;
}

namespace {

struct PointOutcome {
    std::vector<ReportRow> rows;
    std::exception_ptr error;
};

using Clock = std::chrono::steady_clock;

PointOutcome run_point(const PointSpec& p, Mode mode, const std::string& out_dir, const std::string& data_dir,
                       bool write_data)
{
    PointOutcome po;
    const Settings& s = p.settings;
    std::vector<ReportRow> rows(s.methods.size());
    for (std::size_t m = 0; m < rows.size(); ++m) {
        rows[m].sweep = p.sweep;
        rows[m].field = p.field;
        rows[m].value = p.value;
        rows[m].method = s.methods[m];
        rows[m].repeats = s.repeats;
        rows[m].theta_true = true_theta(s);
    }
    const std::string label = p.label();
    for (int rep = 0; rep < s.repeats; ++rep) {
        auto t0 = Clock::now();
        const std::string rep_dir = "rep" + std::to_string(rep);
        Dataset d = mode == Mode::fit ? load_dataset(s, (fs::path(data_dir) / label / rep_dir).string())
                                      : simulate_point(s, rep);
        double sim_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        if (mode == Mode::simulate) {
            save_dataset(s, d, (fs::path(out_dir) / "data" / label / rep_dir).string(), true);
            continue;
        }
        if (write_data && rep == 0 && mode == Mode::run)
            save_dataset(s, d, (fs::path(out_dir) / "data" / label / rep_dir).string(), false);
        for (std::size_t m = 0; m < rows.size(); ++m) {
            auto t1 = Clock::now();
            FitOutput fo = fit_point(s, d, s.methods[m]);
            rows[m].wall_seconds += sim_seconds + std::chrono::duration<double>(Clock::now() - t1).count();
            if (write_data && rep == 0) {
                fs::path dd = fs::path(out_dir) / "data" / label / rep_dir;
                fs::create_directories(dd);
                if (fo.trace) save_trace_csv(*fo.trace, (dd / (s.methods[m] + "_entropy.csv")).string());
                if (fo.terms) save_terms_csv(*fo.terms, (dd / (s.methods[m] + "_terms.csv")).string());
            }
            rows[m].fits.push_back(fo.fit);
        }
    }
    for (auto& r : rows) {
        if (r.fits.empty()) continue;
        const auto J = r.fits.front().theta_hat.size();
        r.theta_hat.assign(J, 0.0);
        r.mre_percent = 0.0;
        for (auto& f : r.fits) {
            for (std::size_t j = 0; j < J; ++j) r.theta_hat[j] += f.theta_hat[j] / r.fits.size();
            double m = f.mre_percent ? *f.mre_percent : nan();
            r.mre_each.push_back(m);
            r.mre_percent += m / r.fits.size();
            r.loss_data += f.loss_data / r.fits.size();
            r.loss_thermo += f.loss_thermo / r.fits.size();
            r.loss_constraint += f.loss_constraint / r.fits.size();
            r.iterations += f.iterations;
            r.legendre_order = f.legendre_order;
            r.converged = r.converged && f.converged;
        }
    }
    po.rows = std::move(rows);
    return po;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt, Mode mode, const std::string& data_dir)
{
    auto pts = expand(cfg, opt);
    RunSummary sum;
    sum.out_dir = pts.front().settings.output_dir;
    if (opt.write_data || mode != Mode::run) fs::create_directories(sum.out_dir);

    std::vector<PointOutcome> outcomes(pts.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_lock;
    auto worker = [&] {
        for (;;) {
            std::size_t k = next++;
            if (k >= pts.size()) return;
            try {
                outcomes[k] = run_point(pts[k], mode, sum.out_dir, data_dir, opt.write_data);
            } catch (...) {
                outcomes[k].error = std::current_exception();
            }
            if (!opt.quiet) {
                std::lock_guard<std::mutex> g(log_lock);
                std::cerr << "[" << (k + 1) << "/" << pts.size() << "] " << pts[k].label() << " done\n";
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(pts.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> th;
        for (int j = 0; j < jobs; ++j) th.emplace_back(worker);
        for (auto& t : th) t.join();
    }
    for (auto& o : outcomes) {
        if (o.error) std::rethrow_exception(o.error);
        for (auto& r : o.rows) {
            sum.all_converged = sum.all_converged && r.converged;
            sum.rows.push_back(std::move(r));
        }
    }
    if (mode != Mode::simulate && opt.write_data) {
        write_report(sum.rows, (fs::path(sum.out_dir) / "report.csv").string(), cfg.source);
        write_timing(sum.rows, (fs::path(sum.out_dir) / "timing.csv").string());
        write_fits(sum.rows, (fs::path(sum.out_dir) / "fit.json").string());
    }
    return sum;
}

void write_report(const std::vector<ReportRow>& rows, const std::string& path, const std::string& config_source)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "# schema_version=1\n";
    f << "# config=" << fs::path(config_source).filename().string() << '\n';
    const std::size_t J = rows.empty() ? 0 : rows.front().theta_true.size();
    f << "sweep,field,value,method,repeats,legendre_order";
    for (std::size_t j = 1; j <= J; ++j) f << ",theta_hat_" << j;
    for (std::size_t j = 1; j <= J; ++j) f << ",theta_true_" << j;
    f << ",mre_percent,loss_data,loss_thermo,loss_constraint,iterations,converged\n";
    for (auto& r : rows) {
        f << r.sweep << ',' << r.field << ',' << r.value << ',' << r.method << ',' << r.repeats << ','
          << r.legendre_order;
        for (std::size_t j = 0; j < J; ++j) f << ',' << (j < r.theta_hat.size() ? fmt_num(r.theta_hat[j]) : "");
        for (std::size_t j = 0; j < J; ++j) f << ',' << (j < r.theta_true.size() ? fmt_num(r.theta_true[j]) : "");
        f << ',' << fmt_num(r.mre_percent) << ',' << fmt_num(r.loss_data) << ',' << fmt_num(r.loss_thermo) << ','
          << fmt_num(r.loss_constraint) << ',' << r.iterations << ',' << (r.converged ? "true" : "false") << '\n';
    }
}

void write_timing(const std::vector<ReportRow>& rows, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "sweep,value,method,wall_seconds\n";
    for (auto& r : rows) f << r.sweep << ',' << r.value << ',' << r.method << ',' << fmt_num(r.wall_seconds) << '\n';
}

void write_fits(const std::vector<ReportRow>& rows, const std::string& path)
{
    nlohmann::json arr = nlohmann::json::array();
    for (auto& r : rows)
        for (std::size_t k = 0; k < r.fits.size(); ++k)
            arr.push_back({{"sweep", r.sweep},
                           {"field", r.field},
                           {"value", r.value},
                           {"method", r.method},
                           {"repeat", k},
                           {"fit", nlohmann::json::parse(to_json(r.fits[k]))}});
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << arr.dump(2) << '\n';
}

std::string find_config(const std::string& name)
{
    std::vector<fs::path> roots;
    if (const char* env = std::getenv("ENSIL_CONFIG_DIR")) roots.emplace_back(env);
    roots.emplace_back("configs");
#ifdef ENSIL_SOURCE_CONFIG_DIR
    roots.emplace_back(ENSIL_SOURCE_CONFIG_DIR);
#endif
    for (auto& r : roots)
        if (fs::exists(r / name)) return (r / name).string();
    throw ConfigError("bundled config " + name + " not found (set ENSIL_CONFIG_DIR)");
}

}  // namespace ensil
