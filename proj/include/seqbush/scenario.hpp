#pragma once

// Scenario configuration, runs with and without ridesharing, sensitivity sweeps and the on-disk
// solution format read back by the verifier.

#include "seqbush/assign.hpp"
#include "seqbush/matchgen.hpp"
#include "seqbush/netio.hpp"
#include "seqbush/oracle.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace seqbush {

struct SweepSpec {
    std::string param; // nu_d_RD or alpha_driver
    double from = 0.0;
    double to = 0.0;
    int steps = 1;
    std::vector<double> grid() const;
};

struct ScenarioConfig {
    std::string source_path; // config file, empty when parsed from a stream
    std::string net_file;
    std::string trips_file;
    std::string modal_demand_file; // fixed modal demand; disables mode choice
    CostModel model = default_cost_model();
    bool ridesharing = true;
    PoolOptions pool;
    SolverConfig solver;
    std::string output_dir;
    bool baseline = true;
    bool verify = true;
    int threads = 1;
    bool deterministic = true;
    // Desk-scale limits for automatic oracle verification.
    int verify_max_nodes = 40;
    int verify_max_sequences = 64;
    std::optional<SweepSpec> sweep;

    void validate() const;
};

/// Parses the INI-style scenario file. Relative paths resolve against `base_dir`.
ScenarioConfig parse_config(std::istream& in, const std::string& base_dir);
ScenarioConfig load_config(const std::string& path);

/// Applies a sweep parameter value to a cost model.
void apply_sweep_value(CostModel& model, const std::string& param, double value);

struct ScenarioInputs {
    Network net;
    DemandTable demand;
    ModalDemandTable modal;
    bool fixed_modes = false;
    std::vector<MatchingSequence> pool;
};

ScenarioInputs load_inputs(const ScenarioConfig& cfg);
/// Driver and passenger ODs of the pool: ODs with RD / RP demand under fixed modes, every OD otherwise.
std::vector<MatchingSequence> build_pool(const ScenarioConfig& cfg, const ScenarioInputs& in);
Problem make_problem(const ScenarioConfig& cfg, const ScenarioInputs& in, bool with_ridesharing);

struct NetworkMetrics {
    ModalValues shares{}; // DA (incl. unmatched RD), RD matched, RP matched, PT (incl. unmatched RP)
    double vkt = 0.0;
    double vht = 0.0;
    double matched_riders = 0.0;
    double total_demand = 0.0;
};

NetworkMetrics network_metrics(const Network& net, const CostModel& model, const std::vector<MatchingSequence>& pool,
                               const EquilibriumSolution& sol);

struct RunReport {
    NetworkMetrics with_rs;
    std::optional<NetworkMetrics> without_rs;
    double trips_saved = 0.0;
    double vkt_saved = 0.0;
    double vht_saved = 0.0;
    double vkt_saved_pct = 0.0;
    double vht_saved_pct = 0.0;
    double trips_saved_pct = 0.0;
    bool converged = false;
    GapReport final_gap;
    int inner_iterations = 0;
    int outer_iterations = 0;
    double wall_seconds = 0.0;
    std::size_t sequence_count = 0;
    std::optional<oracle::ResidualReport> verification;
    bool verification_passed = true;
    EquilibriumSolution solution;

    std::string summary() const;
};

void fill_savings(RunReport& r);

RunReport run_scenario(const ScenarioConfig& cfg);
RunReport run_scenario(const ScenarioConfig& cfg, const ScenarioInputs& inputs);

struct SweepPoint {
    double value = 0.0;
    RunReport report;
    std::string error;
};

/// One solve per grid value. Single-threaded runs warm start from the previous point; with more
/// threads the points are solved independently from cold starts.
std::vector<SweepPoint> run_sweep(const ScenarioConfig& cfg, const SweepSpec& spec);

/// Writes the solution directory: network, sequences, flows, costs, gaps, summary and meta data.
void write_solution_dir(const std::string& dir, const ScenarioConfig& cfg, const ScenarioInputs& in,
                        const RunReport& report);
void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& points, const std::string& param);

/// Everything verify_solution needs, reloaded from a solution directory.
struct StoredSolution {
    Network net;
    CostModel model;
    std::vector<MatchingSequence> pool;
    SolutionFlows flows;
    bool endogenous_modes = false;
    int capacity = 2;
    bool converged = false;
};

StoredSolution read_solution_dir(const std::string& dir);

} // namespace seqbush
