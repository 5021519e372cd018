#include "ensil/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ensil {

std::string reproduce_config(const std::string& name)
{
    if (name == "t2") return find_config("schlogl_sweeps.cfg");
    if (name == "t3") return find_config("doublewell_models.cfg");
    if (name == "mm") return find_config("mm.cfg");
    if (name == "lorenz") return find_config("lorenz.cfg");
    if (name == "pme") return find_config("pme.cfg");
    throw ConfigError("unknown result '" + name + "' (expected t2, t3, mm, lorenz or pme)");
}

namespace {

const ReportRow* find_row(const std::vector<ReportRow>& rows, const std::string& sweep, const std::string& method,
                          std::optional<double> value = std::nullopt)
{
    for (auto& r : rows) {
        if (r.sweep != sweep || r.method != method) continue;
        if (value) {
            double v = std::strtod(r.value.c_str(), nullptr);
            if (std::abs(v - *value) > 1e-12 * std::max(1.0, std::abs(*value))) continue;
        }
        return &r;
    }
    return nullptr;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// largest relative error over nonzero truths, percent
double worst_relative(const ReportRow& r)
{
    double w = 0.0;
    for (std::size_t j = 0; j < r.theta_true.size(); ++j) {
        if (r.theta_true[j] == 0.0) continue;
        double e = 100.0 * std::abs(r.theta_hat[j] - r.theta_true[j]) / std::abs(r.theta_true[j]);
        if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
        w = std::max(w, e);
    }
    return w;
}

CriterionLine line(int id, std::string what, double measured, std::string rel, double target)
{
    CriterionLine c;
    c.id = id;
    c.what = std::move(what);
    c.measured = measured;
    c.relation = std::move(rel);
    c.target = target;
    if (!std::isfinite(measured)) c.pass = false;
    else if (c.relation == "<=") c.pass = measured <= target;
    else if (c.relation == ">=") c.pass = measured >= target;
    else c.pass = measured < target;
    return c;
}

}  // namespace

std::vector<CriterionLine> evaluate_criteria(const std::string& name, const std::vector<ReportRow>& rows, bool full)
{
    std::vector<CriterionLine> out;
    auto mre_of = [&](const std::string& sweep, const std::string& method, std::optional<double> v = std::nullopt) {
        const ReportRow* r = find_row(rows, sweep, method, v);
        return r ? r->mre_percent : nan();
    };
    if (name == "t2") {
        const ReportRow* r1 = find_row(rows, "dt", "ensil", 0.001);
        out.push_back(line(1, "Schlogl clean dt=0.001 EnSIL MRE %", r1 ? r1->mre_percent : nan(), "<=", 1.0));
        out.push_back(line(1, "Schlogl clean dt=0.001 wall seconds", r1 ? r1->wall_seconds : nan(), "<=", 60.0));
        double e01 = mre_of("dt", "ensil", 0.1);
        out.push_back(line(2, "Schlogl dt=0.1 EnSIL MRE %", e01, "<=", 1.0));
        out.push_back(line(2, "Schlogl dt=0.5 EnSIL MRE %", mre_of("dt", "ensil", 0.5), "<=", 8.0));
        out.push_back(line(2, "Schlogl dt=0.1 SINDy/EnSIL MRE ratio", mre_of("dt", "sindy", 0.1) / e01, ">=", 5.0));
        out.push_back(line(3, "Schlogl noise 0.1% EnSIL MRE %", mre_of("noise", "ensil", 0.001), "<=", 1.0));
        out.push_back(line(3, "Schlogl noise 1% EnSIL MRE %", mre_of("noise", "ensil", 0.01), "<=", 3.0));
        out.push_back(line(3, "Schlogl noise 5% EnSIL MRE %", mre_of("noise", "ensil", 0.05), "<=", 10.0));
    } else if (name == "mm") {
        const ReportRow* r = find_row(rows, "base", "ensil");
        out.push_back(line(4, "MM clean EnSIL MRE %", r ? r->mre_percent : nan(), "<=", 1.0));
        out.push_back(line(4, "MM |k2-| estimate", r ? std::abs(r->theta_hat.at(3)) : nan(), "<", 1e-2));
    } else if (name == "lorenz") {
        const ReportRow* pre = find_row(rows, "pre", "ensil");
        out.push_back(line(5, "Lorenz pre-attractor worst relative error %", pre ? worst_relative(*pre) : nan(), "<=",
                           2.0));
        out.push_back(line(5, "Lorenz attractor MRE %", mre_of("attractor", "ensil"), "<=", 3.0));
    } else if (name == "pme") {
        const ReportRow* c = find_row(rows, "clean", "ensil");
        const ReportRow* n = find_row(rows, "noisy", "ensil");
        out.push_back(line(6, "PME clean worst relative error %", c ? worst_relative(*c) : nan(), "<=", 5.0));
        out.push_back(line(6, "PME noisy worst relative error %", n ? worst_relative(*n) : nan(), "<=", 15.0));
        out.push_back(line(6, "PME clean wall seconds", c ? c->wall_seconds : nan(), "<=", 600.0));
    } else if (name == "t3") {
        const double t1 = full ? 5.0 : 10.0, t24 = full ? 8.0 : 15.0;
        out.push_back(line(7, "double-well Model 1 MRE %", mre_of("model1", "ensil"), "<=", t1));
        for (int k = 2; k <= 4; ++k)
            out.push_back(line(7, "double-well Model " + std::to_string(k) + " MRE %",
                               mre_of("model" + std::to_string(k), "ensil"), "<=", t24));
    } else {
        throw ConfigError("unknown result '" + name + "'");
    }
    return out;
}

std::string format_line(const CriterionLine& c)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s criterion %d: %s = %.6g (target %s %g)", c.pass ? "PASS" : "FAIL", c.id,
                  c.what.c_str(), c.measured, c.relation.c_str(), c.target);
    return buf;
}

}  // namespace ensil
