#pragma once

#include "ensil/config.hpp"
#include "ensil/entropy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ensil {

struct RunOptions {
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool write_data = true;
    bool quiet = false;
    KeyValues overrides;  // applied after the config, before sweep values
};

struct PointSpec {
    std::string sweep = "base";
    std::string field;
    std::string value;
    Settings settings;
    std::string label() const;
};

std::vector<PointSpec> expand(const ExperimentConfig& cfg, const RunOptions& opt);

struct Dataset {
    TimeSeries ts;  // ODE benchmarks (possibly noisy)
    TimeSeries clean;
    FieldSeries fields;
    ParticleEnsemble ensemble;
};

Dataset simulate_point(const Settings& s, int repeat);
void save_dataset(const Settings& s, const Dataset& d, const std::string& dir, bool raw);
Dataset load_dataset(const Settings& s, const std::string& dir);

std::vector<double> true_theta(const Settings& s);

struct FitOutput {
    FitResult fit;
    std::optional<EntropyTrace> trace;
    std::optional<TermMatrix> terms;
};

FitOutput fit_point(const Settings& s, const Dataset& d, const std::string& method);

struct ReportRow {
    std::string sweep, field, value, method;
    int repeats = 1;
    std::vector<double> theta_hat;  // mean over repeats
    std::vector<double> theta_true;
    std::vector<double> mre_each;
    double mre_percent = 0.0;
    double loss_data = 0.0, loss_thermo = 0.0, loss_constraint = 0.0;
    long iterations = 0;
    int legendre_order = 0;
    bool converged = true;
    double wall_seconds = 0.0;
    std::vector<FitResult> fits;
};

enum class Mode { run, simulate, fit };

struct RunSummary {
    std::vector<ReportRow> rows;
    std::string out_dir;
    bool all_converged = true;
};

// data_dir is read when mode == fit
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt, Mode mode = Mode::run,
                          const std::string& data_dir = "");

void write_report(const std::vector<ReportRow>& rows, const std::string& path, const std::string& config_source);
void write_timing(const std::vector<ReportRow>& rows, const std::string& path);
void write_fits(const std::vector<ReportRow>& rows, const std::string& path);

// locate a bundled config by file name
std::string find_config(const std::string& name);

struct CriterionLine {
    int id = 0;
    std::string what;
    double measured = 0.0;
    std::string relation;  // "<=", ">=", "<"
    double target = 0.0;
    bool pass = false;
};

std::string reproduce_config(const std::string& name);
// full = 10^6 particles for t3, with the tighter targets
std::vector<CriterionLine> evaluate_criteria(const std::string& name, const std::vector<ReportRow>& rows,
                                             bool full = false);
std::string format_line(const CriterionLine& c);

}  // namespace ensil
