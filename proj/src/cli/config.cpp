#include "ensil/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ensil {

namespace {

const std::set<std::string> kKeys = {
    "benchmark", "seed", "output_dir",
    "model.ic", "model.xyz", "model.rates", "model.substep", "model.m", "model.k", "model.a", "model.b", "model.c",
    "model.sigma", "model.particles", "model.partitions", "model.em_dt",
    "grid.n", "grid.lo", "grid.hi",
    "sample.dt", "sample.t_start", "sample.t_end",
    "noise.kind", "noise.epsilon", "noise.sigma",
    "fit.legendre_order", "fit.weights", "fit.t_ref", "fit.sign_mode", "fit.denoise_order", "fit.methods",
    "fit.repeats", "fit.long_time", "fit.filter", "fit.t_start", "fit.bandwidth_factor", "fit.extrapolate",
    "fit.stage2", "fit.grid_points", "fit.free_offset",
    "sindy.degree", "sindy.threshold", "sindy.ridge", "sindy.equations", "sindy.library", "sindy.entropy_row",
};

const std::set<std::string> kBenchmarks = {"mm", "schlogl", "lorenz", "pme", "doublewell"};

std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line)
{
    auto p = line.find('#');
    return p == std::string::npos ? line : line.substr(0, p);
}

std::vector<std::string> split_items(const std::string& v)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(v);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

void check_key(const std::string& key, const std::string& where)
{
    if (!kKeys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

}  // namespace

double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("field '" + key + "': expected a number, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    for (auto& s : split_items(v)) out.push_back(parse_double(key, s));
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin)
{
    ExperimentConfig cfg;
    cfg.source = origin;
    std::istringstream in(text);
    std::string line, section;
    SweepSpec* sweep = nullptr;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const std::string where = origin + ":" + std::to_string(ln);
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            std::string name = trim(line.substr(1, line.size() - 2));
            if (name.rfind("sweep", 0) == 0) {
                cfg.sweeps.push_back({});
                sweep = &cfg.sweeps.back();
                sweep->name = trim(name.substr(5));
                if (sweep->name.empty()) sweep->name = "sweep" + std::to_string(cfg.sweeps.size());
                section.clear();
            } else {
                if (name != "model" && name != "grid" && name != "sample" && name != "noise" && name != "fit" &&
                    name != "sindy")
                    throw ConfigError(where + ": unknown section [" + name + "]");
                section = name;
                sweep = nullptr;
            }
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (sweep) {
            if (key == "field") {
                check_key(val, where);
                sweep->field = val;
            } else if (key == "values") {
                sweep->values = split_items(val);
            } else {
                check_key(key, where);
                sweep->overrides[key] = val;
            }
            continue;
        }
        std::string full = section.empty() ? key : section + "." + key;
        check_key(full, where);
        cfg.base[full] = val;
    }
    if (!cfg.base.count("benchmark")) throw ConfigError(origin + ": missing required field 'benchmark'");
    for (auto& s : cfg.sweeps) {
        if (s.field.empty()) throw ConfigError(origin + ": sweep '" + s.name + "' lacks 'field'");
        if (s.values.empty()) throw ConfigError(origin + ": sweep '" + s.name + "' lacks 'values'");
    }
    resolve(cfg.base);
    for (auto& s : cfg.sweeps)
        for (auto& v : s.values) {
            auto kv = merged(cfg.base, s.overrides);
            kv[s.field] = v;
            resolve(kv);
        }
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

KeyValues merged(const KeyValues& base, const KeyValues& overrides)
{
    KeyValues kv = base;
    for (auto& [k, v] : overrides) kv[k] = v;
    return kv;
}

namespace {

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("field '" + key + "': expected a boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v)
{
    double d = parse_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError("field '" + key + "': expected an integer");
    return static_cast<int>(d);
}

}  // namespace

Settings resolve(const KeyValues& kv)
{
    Settings s;
    auto has = [&](const std::string& k) { return kv.count(k) > 0; };
    auto get = [&](const std::string& k) { return kv.at(k); };
    auto num = [&](const std::string& k, double def) { return has(k) ? parse_double(k, get(k)) : def; };
    auto integer = [&](const std::string& k, int def) { return has(k) ? parse_int(k, get(k)) : def; };
    auto flag = [&](const std::string& k, bool def) { return has(k) ? parse_bool(k, get(k)) : def; };
    auto list = [&](const std::string& k, std::vector<double> def) { return has(k) ? parse_list(k, get(k)) : def; };

    s.benchmark = has("benchmark") ? get("benchmark") : "";
    if (!kBenchmarks.count(s.benchmark))
        throw ConfigError("field 'benchmark': unknown benchmark '" + s.benchmark +
                          "' (expected mm, schlogl, lorenz, pme or doublewell)");
    const std::string& b = s.benchmark;
    if (has("seed")) {
        double d = parse_double("seed", get("seed"));
        if (d < 0 || d != std::floor(d)) throw ConfigError("field 'seed': expected a nonnegative integer");
        s.seed = static_cast<std::uint64_t>(d);
    }
    if (has("output_dir")) s.output_dir = get("output_dir");

    // per-benchmark defaults
    double dt = 0.01, t_end = 10.0, substep = 0.0;
    int order = 20;
    if (b == "mm") {
        s.ic = {20, 50, 10, 10};
        dt = 0.001;
        order = 300;
    } else if (b == "schlogl") {
        s.ic = {0.5, 4, 1};
        dt = 0.001;
        substep = 0.001;
    } else if (b == "lorenz") {
        s.xyz = {2.6, 3.8, 19.1};
        dt = 1e-5;
        substep = 1e-6;
        t_end = 0.02;
        order = 100;
        s.sign_mode = SignMode::free;
    } else if (b == "pme") {
        dt = 0.01;
        t_end = 0.5;
        substep = 1e-4;
        order = 25;
        s.noise.kind = NoiseKind::multiplicative;
    } else {
        dt = 0.1;
        s.sign_mode = SignMode::production;
    }

    s.ic = list("model.ic", s.ic);
    s.xyz = list("model.xyz", s.xyz);
    if (has("model.rates")) s.rates = parse_list("model.rates", get("model.rates"));
    s.substep = num("model.substep", substep);
    s.pme.m = num("model.m", 2.0);
    auto k = list("model.k", {10, 50, 30});
    if (k.size() != 3) throw ConfigError("field 'model.k': expected three coefficients");
    s.pme.k1 = k[0];
    s.pme.k2 = k[1];
    s.pme.k3 = k[2];
    s.dw.a = num("model.a", 0.1);
    s.dw.b = num("model.b", 0.3);
    s.dw.c = num("model.c", 0.0);
    s.dw.sigma = num("model.sigma", 1.0);
    s.particles = static_cast<std::size_t>(num("model.particles", 100000));
    s.partitions = integer("model.partitions", 8);
    s.em_dt = num("model.em_dt", 0.01);

    int gn = integer("grid.n", 128);
    s.grid.nx = s.grid.ny = gn;
    s.grid.x_lo = s.grid.y_lo = num("grid.lo", -8.0);
    s.grid.x_hi = s.grid.y_hi = num("grid.hi", 8.0);

    s.dt = num("sample.dt", dt);
    s.t_start = num("sample.t_start", 0.0);
    s.t_end = num("sample.t_end", t_end);

    if (has("noise.kind")) {
        if (get("noise.kind") == "additive") s.noise.kind = NoiseKind::additive;
        else if (get("noise.kind") == "multiplicative") s.noise.kind = NoiseKind::multiplicative;
        else throw ConfigError("field 'noise.kind': expected additive or multiplicative");
    }
    s.noise.epsilon = num("noise.epsilon", 0.0);
    s.noise.sigma = num("noise.sigma", 1.0);

    s.legendre_order = integer("fit.legendre_order", order);
    auto w = list("fit.weights", {1, 1, 0});
    if (w.size() != 3) throw ConfigError("field 'fit.weights': expected three weights");
    s.weights = {w[0], w[1], w[2]};
    if (has("fit.t_ref")) s.t_ref = num("fit.t_ref", 0.0);
    if (has("fit.sign_mode")) {
        auto m = get("fit.sign_mode");
        if (m == "dissipative") s.sign_mode = SignMode::dissipative;
        else if (m == "free") s.sign_mode = SignMode::free;
        else if (m == "production") s.sign_mode = SignMode::production;
        else throw ConfigError("field 'fit.sign_mode': expected dissipative, free or production");
    }
    s.denoise_order = integer("fit.denoise_order", 0);
    if (has("fit.methods")) {
        s.methods.clear();
        std::istringstream ss(get("fit.methods"));
        std::string m;
        while (std::getline(ss, m, ',')) {
            m = trim(m);
            if (m != "ensil" && m != "sindy") throw ConfigError("field 'fit.methods': unknown method '" + m + "'");
            s.methods.push_back(m);
        }
    }
    s.repeats = integer("fit.repeats", 1);
    s.long_time = flag("fit.long_time", false);
    s.free_offset = flag("fit.free_offset", false);
    if (s.long_time && !has("fit.weights")) s.weights.constraint = 1.0;
    s.filter_frac = num("fit.filter", 0.0);
    s.fpe_t_start = num("fit.t_start", 0.3);
    s.bandwidth_factor = num("fit.bandwidth_factor", 1.0);
    s.extrapolate = flag("fit.extrapolate", true);
    s.stage2 = flag("fit.stage2", true);
    s.grid_points = integer("fit.grid_points", 512);

    s.sindy.degree = integer("sindy.degree", 3);
    s.sindy.threshold = num("sindy.threshold", 0.05);
    s.sindy.ridge = num("sindy.ridge", 0.0);
    if (has("sindy.equations")) {
        std::string v = get("sindy.equations");
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream ss(v);
        std::string e;
        while (ss >> e) s.sindy_equations.push_back(e);
    }
    if (has("sindy.library")) {
        std::string v = get("sindy.library");
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream ss(v);
        std::string e;
        while (ss >> e) s.sindy_library.push_back(e);
    } else if (b == "schlogl") {
        s.sindy_library = {"x", "a"};
    }
    s.sindy_entropy_row = flag("sindy.entropy_row", false);

    // sanity
    if (!(s.dt > 0)) throw ConfigError("field 'sample.dt': must be positive");
    if (!(s.t_end > s.t_start)) throw ConfigError("field 'sample.t_end': must exceed sample.t_start");
    if (s.repeats < 1) throw ConfigError("field 'fit.repeats': must be >= 1");
    if (s.legendre_order < 0) throw ConfigError("field 'fit.legendre_order': must be >= 0");
    if (s.noise.epsilon < 0) throw ConfigError("field 'noise.epsilon': must be >= 0");
    if (s.weights.data < 0 || s.weights.thermo < 0 || s.weights.constraint < 0)
        throw ConfigError("field 'fit.weights': weights must be >= 0");
    if ((b == "mm" && s.ic.size() != 4) || (b == "schlogl" && s.ic.size() != 3))
        throw ConfigError("field 'model.ic': wrong number of species for " + b);
    if (b == "lorenz" && s.xyz.size() != 3 && s.ic.size() != 6)
        throw ConfigError("field 'model.xyz': expected three Lorenz coordinates");
    if (s.sindy.ridge < 0) throw ConfigError("field 'sindy.ridge': must be >= 0");
    if (s.sindy.threshold < 0) throw ConfigError("field 'sindy.threshold': must be >= 0");
    if (s.rates) {
        std::size_t want = b == "lorenz" ? 10 : (b == "mm" || b == "schlogl") ? 4 : 0;
        if (s.rates->size() != want) throw ConfigError("field 'model.rates': wrong count for " + b);
    }
    if (b == "doublewell" && s.particles < 1000) throw ConfigError("field 'model.particles': need >= 1000");
    if (std::find(s.methods.begin(), s.methods.end(), "sindy") != s.methods.end() && b != "mm" && b != "schlogl")
        throw ConfigError("field 'fit.methods': sindy baseline only covers mm and schlogl");
    return s;
}

}  // namespace ensil
