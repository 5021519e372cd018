#include "ensil/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

int default_jobs()
{
    if (const char* env = std::getenv("ENSIL_JOBS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        std::cerr << "ignoring ENSIL_JOBS='" << env << "'\n";
    }
    return 1;
}

void print_rows(const std::vector<ensil::ReportRow>& rows)
{
    for (auto& r : rows) {
        std::cout << r.sweep;
        if (!r.field.empty()) std::cout << ' ' << r.field << '=' << r.value;
        std::cout << ' ' << r.method << ": MRE " << r.mre_percent << "%" << (r.converged ? "" : " (not converged)")
                  << '\n';
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Recover ODE/PDE/SDE coefficients by fitting entropy and free-energy balance equations"};
    app.require_subcommand(1);

    ensil::RunOptions opt;
    opt.jobs = default_jobs();
    std::uint64_t seed = 0;
    std::string out;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--jobs", opt.jobs, "worker threads for sweep points (default $ENSIL_JOBS or 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
    };

    std::string cfg_path, name, data_dir;
    bool full = false;
    auto* run = app.add_subcommand("run", "simulate, fit and write report.csv");
    run->add_option("config", cfg_path)->required();
    add_common(run);
    auto* rep = app.add_subcommand("reproduce", "run a bundled config and check its acceptance targets");
    rep->add_option("name", name, "t2, t3, mm, lorenz or pme")->required();
    rep->add_flag("--full", full, "t3 at 10^6 particles with the tighter targets");
    add_common(rep);
    auto* sim = app.add_subcommand("simulate", "write synthetic data only");
    sim->add_option("config", cfg_path)->required();
    add_common(sim);
    auto* fit = app.add_subcommand("fit", "fit previously simulated data");
    fit->add_option("config", cfg_path)->required();
    fit->add_option("--data", data_dir, "output directory of an earlier simulate")->required();
    add_common(fit);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    for (auto* sub : {run, rep, sim, fit}) {
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--out")) opt.out = out;
    }

    try {
        if (*rep) {
            auto cfg = ensil::load_config(ensil::reproduce_config(name));
            if (full && name == "t3") opt.overrides["model.particles"] = "1000000";
            if (!opt.out) opt.out = "out/reproduce_" + name;
            auto sum = ensil::run_experiment(cfg, opt);
            print_rows(sum.rows);
            bool ok = true;
            for (auto& c : ensil::evaluate_criteria(name, sum.rows, full)) {
                std::cout << ensil::format_line(c) << '\n';
                ok = ok && c.pass;
            }
            return ok && sum.all_converged ? 0 : 2;
        }
        auto cfg = ensil::load_config(cfg_path);
        ensil::Mode mode = *sim ? ensil::Mode::simulate : *fit ? ensil::Mode::fit : ensil::Mode::run;
        if (mode == ensil::Mode::fit) {
            data_dir = (std::filesystem::path(data_dir) / "data").string();
            if (!std::filesystem::is_directory(data_dir)) {
                std::cerr << "error: no data directory under " << data_dir << '\n';
                return 1;
            }
        }
        auto sum = ensil::run_experiment(cfg, opt, mode, data_dir);
        if (mode == ensil::Mode::simulate) {
            std::cout << "data written to " << sum.out_dir << "/data\n";
            return 0;
        }
        print_rows(sum.rows);
        if (!sum.all_converged) {
            std::cerr << "error: at least one fit did not converge\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
