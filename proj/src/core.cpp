#include "ensil/core.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ensil {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int TimeSeries::index_of(const std::string& name) const
{
    for (std::size_t j = 0; j < species_names.size(); ++j)
        if (species_names[j] == name) return static_cast<int>(j);
    return -1;
}

Vec TimeSeries::column(const std::string& name) const
{
    int j = index_of(name);
    if (j < 0) throw std::invalid_argument("no species named " + name);
    return values.col(j);
}

std::vector<Violation> validate(const TimeSeries& ts)
{
    std::vector<Violation> out;
    const std::size_t m = ts.times.size();
    if (static_cast<std::size_t>(ts.values.rows()) != m)
        out.push_back({0, 0, "row count " + std::to_string(ts.values.rows()) + " != times " + std::to_string(m)});
    if (static_cast<std::size_t>(ts.values.cols()) != ts.species_names.size())
        out.push_back({0, 0, "column count " + std::to_string(ts.values.cols()) + " != species names " +
                                 std::to_string(ts.species_names.size())});
    for (std::size_t i = 0; i < m; ++i)
        if (!std::isfinite(ts.times[i])) out.push_back({i, 0, "non-finite time"});
    for (std::size_t i = 1; i < m; ++i)
        if (!(ts.times[i] > ts.times[i - 1])) out.push_back({i, 0, "non-increasing time at index " + std::to_string(i)});
    if (ts.uniform && m > 2) {
        double dt = ts.times[1] - ts.times[0];
        for (std::size_t i = 2; i < m; ++i) {
            double d = ts.times[i] - ts.times[i - 1];
            if (std::abs(d - dt) > 1e-12 * std::max(std::abs(dt), std::abs(ts.times[i]))) {
                out.push_back({i, 0, "non-uniform spacing at index " + std::to_string(i)});
                break;
            }
        }
    }
    for (Eigen::Index i = 0; i < ts.values.rows(); ++i)
        for (Eigen::Index j = 0; j < ts.values.cols(); ++j)
            if (!std::isfinite(ts.values(i, j)))
                out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                               "non-finite at (" + std::to_string(i) + "," + std::to_string(j) + ")"});
    return out;
}

static std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

static double parse_num(const std::string& s, const std::string& path, std::size_t line)
{
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": bad number '" + s + "'");
    }
}

void save_csv(const TimeSeries& ts, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "t";
    for (auto& n : ts.species_names) f << ',' << n;
    f << '\n';
    for (std::size_t i = 0; i < ts.times.size(); ++i) {
        f << fmt_num(ts.times[i]);
        for (Eigen::Index j = 0; j < ts.values.cols(); ++j) f << ',' << fmt_num(ts.values(i, j));
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

TimeSeries load_csv(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.empty()) throw std::runtime_error(path + ": no rows");
    auto head = split_csv(line);
    if (head.size() < 2 || head[0] != "t") throw std::runtime_error(path + ": malformed header, expected t,<species...>");
    TimeSeries ts;
    ts.species_names.assign(head.begin() + 1, head.end());
    std::vector<std::vector<double>> rows;
    std::size_t ln = 1;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv(line);
        if (cells.size() != head.size())
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": ragged row (" + std::to_string(cells.size()) +
                                     " cells, header has " + std::to_string(head.size()) + ")");
        std::vector<double> r;
        for (auto& c : cells) r.push_back(parse_num(c, path, ln));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no rows");
    ts.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ts.species_names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ts.times.push_back(rows[i][0]);
        for (std::size_t j = 1; j < rows[i].size(); ++j) ts.values(i, j - 1) = rows[i][j];
    }
    ts.uniform = true;
    if (ts.times.size() > 2) {
        double dt = ts.times[1] - ts.times[0];
        for (std::size_t i = 2; i < ts.times.size(); ++i)
            if (std::abs(ts.times[i] - ts.times[i - 1] - dt) > 1e-9 * std::abs(dt)) ts.uniform = false;
    }
    return ts;
}

void ReactionNetwork::check() const
{
    const std::size_t n = species.size();
    if (chemostat_mask.size() != n || chemostat_values.size() != n)
        throw std::invalid_argument("chemostat arrays must match species count");
    for (auto& r : reactions) {
        if (r.nu_fwd.size() != n || r.nu_bwd.size() != n) throw std::invalid_argument("stoichiometry size mismatch");
        for (std::size_t j = 0; j < n; ++j)
            if (r.nu_fwd[j] < 0 || r.nu_bwd[j] < 0) throw std::invalid_argument("negative stoichiometric coefficient");
        if (r.k_fwd < 0 || r.k_bwd < 0) throw std::invalid_argument("negative rate constant");
    }
}

static bool pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void Grid2D::check() const
{
    if (!pow2(nx) || !pow2(ny)) throw std::invalid_argument("grid sizes must be powers of two");
    if (!(x_hi > x_lo) || !(y_hi > y_lo)) throw std::invalid_argument("empty grid domain");
}

double grid_integral(const Grid2D& g, const Field& f)
{
    double s = 0.0;
    for (double v : f.data) s += v;
    return s * g.hx() * g.hy();
}

void save_field_series(const FieldSeries& fs_, const std::string& dir)
{
    fs::create_directories(dir);
    json man;
    man["grid"] = {{"nx", fs_.grid.nx}, {"ny", fs_.grid.ny}, {"x_lo", fs_.grid.x_lo}, {"x_hi", fs_.grid.x_hi},
                   {"y_lo", fs_.grid.y_lo}, {"y_hi", fs_.grid.y_hi}, {"periodic", fs_.grid.periodic}};
    man["times"] = fs_.times;
    man["params"] = json::parse(fs_.params_json);
    std::vector<std::string> files;
    for (std::size_t k = 0; k < fs_.fields.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%04zu.csv", k);
        files.push_back(name);
        std::ofstream f(fs::path(dir) / name);
        if (!f) throw std::runtime_error("cannot write snapshot in " + dir);
        for (int i = 0; i < fs_.grid.nx; ++i) {
            for (int j = 0; j < fs_.grid.ny; ++j) {
                if (j) f << ',';
                f << fmt_num(fs_.fields[k].at(fs_.grid, i, j));
            }
            f << '\n';
        }
    }
    man["snapshots"] = files;
    std::ofstream m(fs::path(dir) / "manifest.json");
    if (!m) throw std::runtime_error("cannot write manifest in " + dir);
    m << man.dump(2) << '\n';
}

FieldSeries load_field_series(const std::string& dir)
{
    std::ifstream m(fs::path(dir) / "manifest.json");
    if (!m) throw std::runtime_error("missing manifest.json in " + dir);
    json man;
    try {
        man = json::parse(m);
    } catch (const json::exception& e) {
        throw std::runtime_error(dir + "/manifest.json: " + e.what());
    }
    FieldSeries out;
    auto& g = man.at("grid");
    out.grid.nx = g.at("nx");
    out.grid.ny = g.at("ny");
    out.grid.x_lo = g.at("x_lo");
    out.grid.x_hi = g.at("x_hi");
    out.grid.y_lo = g.at("y_lo");
    out.grid.y_hi = g.at("y_hi");
    out.grid.check();
    out.times = man.at("times").get<std::vector<double>>();
    out.params_json = man.value("params", json::object()).dump();
    auto files = man.at("snapshots").get<std::vector<std::string>>();
    if (files.size() != out.times.size()) throw std::runtime_error(dir + ": snapshot count != times");
    for (auto& name : files) {
        std::string path = (fs::path(dir) / name).string();
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open " + path);
        Field fld;
        fld.data.reserve(out.grid.points());
        std::string line;
        std::size_t ln = 0;
        while (std::getline(f, line)) {
            ++ln;
            if (line.empty()) continue;
            auto cells = split_csv(line);
            if (cells.size() != static_cast<std::size_t>(out.grid.ny)) throw std::runtime_error(path + ": ragged row");
            for (auto& c : cells) fld.data.push_back(parse_num(c, path, ln));
        }
        if (fld.data.size() != out.grid.points()) throw std::runtime_error(path + ": wrong point count");
        out.fields.push_back(std::move(fld));
    }
    return out;
}

void save_ensemble_csv(const ParticleEnsemble& pe, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "# sigma=" << fmt_num(pe.sigma_used) << " seed=" << pe.seed << '\n';
    f << "t,particle_id,x\n";
    for (std::size_t k = 0; k < pe.times.size(); ++k)
        for (std::size_t p = 0; p < pe.samples[k].size(); ++p)
            f << fmt_num(pe.times[k]) << ',' << p << ',' << fmt_num(pe.samples[k][p]) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path);
}

ParticleEnsemble load_ensemble_csv(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    ParticleEnsemble pe;
    std::string line;
    std::size_t ln = 0;
    bool header = false;
    while (std::getline(f, line)) {
        ++ln;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto s = line.find("sigma=");
            if (s != std::string::npos) pe.sigma_used = std::stod(line.substr(s + 6));
            auto d = line.find("seed=");
            if (d != std::string::npos) pe.seed = std::stoull(line.substr(d + 5));
            continue;
        }
        if (!header) {
            if (line.rfind("t,particle_id,x", 0) != 0) throw std::runtime_error(path + ": malformed header");
            header = true;
            continue;
        }
        auto c = split_csv(line);
        if (c.size() != 3) throw std::runtime_error(path + ":" + std::to_string(ln) + ": ragged row");
        double t = parse_num(c[0], path, ln);
        if (pe.times.empty() || t != pe.times.back()) {
            pe.times.push_back(t);
            pe.samples.emplace_back();
        }
        pe.samples.back().push_back(parse_num(c[2], path, ln));
    }
    if (pe.times.empty()) throw std::runtime_error(path + ": no rows");
    for (auto& s : pe.samples)
        if (s.size() != pe.samples.front().size()) throw std::runtime_error(path + ": particle count varies over time");
    return pe;
}

void save_terms_csv(const TermMatrix& tm, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "t";
    for (Eigen::Index j = 0; j < tm.columns.cols(); ++j) f << ",g" << j + 1;
    f << '\n';
    for (std::size_t i = 0; i < tm.times.size(); ++i) {
        f << fmt_num(tm.times[i]);
        for (Eigen::Index j = 0; j < tm.columns.cols(); ++j) f << ',' << fmt_num(tm.columns(i, j));
        f << '\n';
    }
}

static json nullable(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

std::string to_json(const FitResult& r)
{
    json j;
    j["theta_hat"] = json::array();
    for (double v : r.theta_hat) j["theta_hat"].push_back(nullable(v));
    if (r.theta_true) j["theta_true"] = *r.theta_true;
    else j["theta_true"] = nullptr;
    j["loss_data"] = nullable(r.loss_data);
    j["loss_thermo"] = nullable(r.loss_thermo);
    j["loss_constraint"] = nullable(r.loss_constraint);
    if (r.mre_percent) j["mre_percent"] = *r.mre_percent;
    else j["mre_percent"] = nullptr;
    j["legendre_order"] = r.legendre_order;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    return j.dump(2);
}

void save_json(const FitResult& r, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_json(r) << '\n';
}

static double number_or_nan(const json& v)
{
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

FitResult fit_from_json(const std::string& text)
{
    json j = json::parse(text);
    FitResult r;
    for (auto& v : j.at("theta_hat")) r.theta_hat.push_back(number_or_nan(v));
    if (!j.at("theta_true").is_null()) r.theta_true = j["theta_true"].get<std::vector<double>>();
    r.loss_data = number_or_nan(j.at("loss_data"));
    r.loss_thermo = number_or_nan(j.at("loss_thermo"));
    r.loss_constraint = number_or_nan(j.at("loss_constraint"));
    if (!j.at("mre_percent").is_null()) r.mre_percent = j["mre_percent"].get<double>();
    r.legendre_order = j.at("legendre_order");
    r.iterations = j.at("iterations");
    r.converged = j.at("converged");
    return r;
}

}  // namespace ensil
