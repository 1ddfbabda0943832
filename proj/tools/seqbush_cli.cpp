// Command-line scenario runner: solve, sweep and verify.

#include "seqbush/oracle.hpp"
#include "seqbush/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

enum Exit { kOk = 0, kUsage = 1, kNotConverged = 2, kVerifyFailed = 3 };

void apply_overrides(seqbush::ScenarioConfig& cfg, int threads, bool deterministic)
{
    if (threads > 0)
        cfg.threads = threads;
    if (deterministic)
        cfg.deterministic = true;
}

int cmd_solve(const std::string& config, int threads, bool deterministic, const std::string& out_dir)
{
    auto cfg = seqbush::load_config(config);
    apply_overrides(cfg, threads, deterministic);
    if (!out_dir.empty())
        cfg.output_dir = out_dir;
    const auto inputs = seqbush::load_inputs(cfg);
    std::cerr << "network: " << inputs.net.node_count << " nodes, " << inputs.net.link_count() << " links; "
              << inputs.demand.size() << " OD pairs; " << inputs.pool.size() << " matching sequences\n";
    const auto report = seqbush::run_scenario(cfg, inputs);
    std::cout << report.summary();
    if (!cfg.output_dir.empty()) {
        seqbush::write_solution_dir(cfg.output_dir, cfg, inputs, report);
        std::cerr << "solution written to " << cfg.output_dir << "\n";
    }
    if (!report.converged)
        return kNotConverged;
    if (!report.verification_passed)
        return kVerifyFailed;
    return kOk;
}

int cmd_sweep(const std::string& config, std::string param, double from, double to, int steps, int threads,
              bool deterministic, const std::string& out)
{
    auto cfg = seqbush::load_config(config);
    apply_overrides(cfg, threads, deterministic);
    seqbush::SweepSpec spec = cfg.sweep.value_or(seqbush::SweepSpec{});
    if (!param.empty())
        spec.param = param;
    if (!std::isnan(from))
        spec.from = from;
    if (!std::isnan(to))
        spec.to = to;
    if (steps > 0)
        spec.steps = steps;
    if (spec.param.empty())
        throw seqbush::ValidationError("sweep: --param is required");
    cfg.sweep = spec;
    cfg.validate();
    const auto points = seqbush::run_sweep(cfg, spec);
    bool all_ok = true;
    for (const auto& p : points) {
        std::cout << spec.param << " = " << p.value << ": ";
        if (!p.error.empty()) {
            std::cout << "error: " << p.error << "\n";
            all_ok = false;
            continue;
        }
        const auto& s = p.report.with_rs.shares;
        std::cout << "DA " << 100 * s[0] << "%, RD " << 100 * s[1] << "%, RP " << 100 * s[2] << "%, PT "
                  << 100 * s[3] << "%, VKT saved " << p.report.vkt_saved_pct << "%"
                  << (p.report.converged ? "" : " (not converged)") << "\n";
        all_ok = all_ok && p.report.converged;
    }
    std::string path = out;
    if (path.empty() && !cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        path = (std::filesystem::path(cfg.output_dir) / ("sweep_" + spec.param + ".csv")).string();
    }
    if (!path.empty()) {
        seqbush::write_sweep_csv(path, points, spec.param);
        std::cerr << "sweep written to " << path << "\n";
    }
    return all_ok ? kOk : kNotConverged;
}

int cmd_verify(const std::string& dir, double tol)
{
    const auto stored = seqbush::read_solution_dir(dir);
    seqbush::oracle::VerifyInput in;
    in.net = &stored.net;
    in.model = stored.model;
    in.pool = &stored.pool;
    in.flows = &stored.flows;
    in.endogenous_modes = stored.endogenous_modes;
    in.capacity = stored.capacity;
    const auto rep = seqbush::oracle::verify_solution(in);
    std::cout << rep.to_text();
    const bool ok = rep.passes(tol);
    std::cout << (ok ? "PASS" : "FAIL") << " (max normalized violation " << rep.max_violation() << ", tolerance "
              << tol << ")\n";
    return ok ? kOk : kVerifyFailed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-passenger ridesharing equilibrium solver"};
    app.require_subcommand(1);
    int threads = 0;
    bool deterministic = false;
    app.add_option("--threads", threads, "Worker threads for sweep points")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", deterministic, "Force single-threaded, bit-reproducible runs");

    std::string config, out_dir;
    auto* solve = app.add_subcommand("solve", "Solve a scenario with and without ridesharing");
    solve->add_option("config", config, "Scenario INI file")->required()->check(CLI::ExistingFile);
    solve->add_option("--out", out_dir, "Solution directory (overrides [run] output_dir)");

    std::string param, sweep_out;
    double from = std::nan(""), to = std::nan("");
    int steps = 0;
    auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over one cost parameter");
    sweep->add_option("config", config, "Scenario INI file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", param, "nu_d_RD or alpha_driver");
    sweep->add_option("--from", from, "First grid value");
    sweep->add_option("--to", to, "Last grid value");
    sweep->add_option("--steps", steps, "Number of grid points")->check(CLI::PositiveNumber);
    sweep->add_option("--out", sweep_out, "CSV file for the sweep table");

    std::string dir;
    double tol = 1e-2;
    auto* verify = app.add_subcommand("verify", "Check equilibrium residuals of a stored solution");
    verify->add_option("solution-dir", dir, "Directory written by solve")->required()->check(CLI::ExistingDirectory);
    verify->add_option("--tol", tol, "Normalized violation tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    try {
        if (*solve)
            return cmd_solve(config, threads, deterministic, out_dir);
        if (*sweep)
            return cmd_sweep(config, param, from, to, steps, threads, deterministic, sweep_out);
        if (*verify)
            return cmd_verify(dir, tol);
    } catch (const seqbush::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kUsage;
    } catch (const seqbush::ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
