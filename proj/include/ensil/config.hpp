#pragma once

#include "ensil/core.hpp"
#include "ensil/learn.hpp"
#include "ensil/models.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ensil {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;  // "section.key" -> raw value

struct SweepSpec {
    std::string name;
    std::string field;
    std::vector<std::string> values;
    KeyValues overrides;
};

struct ExperimentConfig {
    std::string source;
    KeyValues base;
    std::vector<SweepSpec> sweeps;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// Typed view of one fully resolved point (base + sweep overrides).
struct Settings {
    std::string benchmark;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    std::vector<double> ic;
    std::vector<double> xyz;  // Lorenz coordinates, mapped onto concentrations
    std::optional<std::vector<double>> rates;
    double substep = 0.0;     // internal integrator step; 0 = one step per sample

    PMEParams pme;
    Grid2D grid;
    DoubleWellParams dw;
    std::size_t particles = 100000;
    int partitions = 8;
    double em_dt = 0.01;

    double dt = 0.01;
    double t_start = 0.0;
    double t_end = 10.0;

    NoiseSpec noise;

    int legendre_order = 20;
    Weights weights;
    std::optional<double> t_ref;
    SignMode sign_mode = SignMode::dissipative;
    int denoise_order = 0;
    std::vector<std::string> methods = {"ensil"};
    int repeats = 1;
    bool long_time = false;
    bool free_offset = false;
    double filter_frac = 0.0;
    double fpe_t_start = 0.3;
    double bandwidth_factor = 1.0;
    bool extrapolate = true;
    bool stage2 = true;
    int grid_points = 512;

    LibrarySpec sindy;
    std::vector<std::string> sindy_equations;
    std::vector<std::string> sindy_library;  // empty = every species
    bool sindy_entropy_row = false;
};

Settings resolve(const KeyValues& kv);
KeyValues merged(const KeyValues& base, const KeyValues& overrides);

std::vector<double> parse_list(const std::string& key, const std::string& v);
double parse_double(const std::string& key, const std::string& v);

}  // namespace ensil
