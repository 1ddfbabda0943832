#pragma once

// Sequence-bush equilibrium engine: mode split, platform matching, bush updates, sequence flow
// pushing and the augmented Lagrangian outer loop.

#include "seqbush/bush.hpp"
#include "seqbush/hypernet.hpp"
#include "seqbush/matchgen.hpp"
#include "seqbush/netio.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace seqbush {

struct SolverConfig {
    double eps_m = 1e-2;
    double eps_n = 1e-2;
    double eps_3 = 5e-3;
    int inner_cap = 5000;
    int outer_cap = 20;
    double sigma1 = 2.0;
    double sigma2 = 0.25;
    // Self-regulated averaging: Gamma grows by gamma_large when the change norm grew, else gamma_small.
    double gamma0 = 1.0;
    double gamma_large = 1.9;
    double gamma_small = 0.1;
    // Mode split step: theta1 = mode_step * q_w / (Gamma * mean modal cost of w).
    double mode_step = 20.0;
    // Matching step: theta2 = match_step * (mean OD demand / max |R|) / Gamma.
    double match_step = 1.0;
    // Proximal weight on sequence flow moves (added to the Newton denominator, scaled by Gamma).
    double push_prox = 0.0;
    bool mode_choice = true;
    bool even_initial_split = true;
    // Recompute link costs after every flow shift (true) or once per pass (false).
    bool immediate_cost_refresh = true;
    int max_moves_per_group = 0; // 0: 2 x number of options
    int min_inner_iterations = 1;
    // Relative flow below which a flow is treated as zero.
    double flow_eps = 1e-9;
    // Print a gap line to stderr every this many inner iterations (0: silent).
    int log_every = 0;
};

struct GapReport {
    double G_M = 0.0;
    double G_N = 0.0;
    double route_gap = 0.0;    // part of G_N from route choice
    double sequence_gap = 0.0; // part of G_N from sequence choice
    double al_ratio = 0.0;
    double violation = 0.0;    // sum of positive F - Z, normalized by total demand
    int inner_iteration = 0;
    int outer_iteration = 0;
};

/// Per-OD modal costs faced by a traveller who switches into the mode.
struct ModalCosts {
    std::map<OD, ModalValues> cost;
    // Descriptive shared-distance fraction of matched RD trips.
    std::map<OD, double> gamma;
};

struct ALParams {
    double rho = 0.0;
    std::vector<double> mu;
    double sigma1 = 2.0;
    double sigma2 = 0.25;
    double prev_violation_norm = -1.0;
    bool seeded = false;
};

struct SequenceReport {
    int id = 0;
    OD driver;
    std::string label;
    double R = 0.0;
    double min_cost = 0.0; // bundle cost along cheapest level routes
    double max_cost = 0.0; // bundle cost along costliest used level routes
    double rd_cost = 0.0;  // driver class cost along cheapest routes
    std::vector<std::pair<OD, double>> rider_costs; // per served passenger
    double generalized_cost = 0.0; // rd_cost plus the driver's matching multiplier
    double F = 0.0;
    double Z = 0.0;
    double mu = 0.0;
};

struct ODReport {
    OD od;
    ODFlows flows;
    ModalValues cost{};
    double rd_generalized = 0.0; // cheapest option cost for the driver, multiplier included
};

struct EquilibriumSolution {
    SolutionFlows flows;
    LinkCosts costs;
    ModalCosts modal;
    std::vector<SequenceReport> sequences;
    std::vector<ODReport> ods;
    std::vector<GapReport> history;
    GapReport final_gap;
    int inner_iterations = 0;
    int outer_iterations = 0;
    bool converged = false;
    double generalized_total = 0.0;
};

/// Demand input: total OD demand (mode choice on) or fixed modal demand (mode choice off).
struct Problem {
    const Network* net = nullptr;
    CostModel model;
    std::vector<MatchingSequence> pool;
    DemandTable demand;
    ModalDemandTable modal_demand; // used when mode choice is off
    int capacity = 2;
};

/// One-OD closed-form mode shift: every mode above the cheapest gives min(q, theta*(C - Cmin)) to it.
/// Ties for the cheapest mode go to the lowest mode index.
ModalValues mode_split_step(const ModalValues& q, const ModalValues& cost, double theta);

/// Euclidean projection onto {Z >= 0, sum_{n of driver w} Z_n <= qRD_w, sum_n count_p(n) Z_n <= qRP_p}.
std::vector<double> project_matching(const std::vector<MatchingSequence>& pool, const std::vector<double>& Z,
                                     const std::map<OD, double>& q_rd, const std::map<OD, double>& q_rp,
                                     int max_sweeps = 10000, double tol = 1e-10);

/// Greedy feasible initial quota: sequences with R > 0 by decreasing R, then more distinct riders, then id.
std::vector<double> greedy_matching(const std::vector<MatchingSequence>& pool, const std::map<OD, double>& q_rd,
                                    const std::map<OD, double>& q_rp);

/// Augmented Lagrangian value (1/2rho) sum [max(0, mu + rho h)^2 - mu^2], or sum mu h when rho = 0.
double al_value(const std::vector<double>& mu, double rho, const std::vector<double>& h);

/// Multiplier and penalty update for a later outer iteration.
void update_al(ALParams& al, const std::vector<double>& h);

/// Route-choice gap of a flow split: sum_k f_k c_k - demand * min_k c_k.
double route_gap(const std::vector<double>& flows, const std::vector<double>& costs);

struct InnerSnapshot {
    int inner_iteration = 0;
    int outer_iteration = 0;
    const SolutionFlows* flows = nullptr;
    const std::vector<MatchingSequence>* pool = nullptr;
    const Network* net = nullptr;
    bool bushes_acyclic = true;
    GapReport gap;
};

class EquilibriumSolver {
public:
    EquilibriumSolver(const Problem& problem, SolverConfig config);
    ~EquilibriumSolver();
    EquilibriumSolver(const EquilibriumSolver&) = delete;
    EquilibriumSolver& operator=(const EquilibriumSolver&) = delete;

    /// Algorithm step 0: even (or fixed) modal split, everyone in ridesharing quits, greedy Z.
    void initialize();
    /// Runs inner and outer loops until convergence or the iteration caps.
    EquilibriumSolution solve();
    /// Keeps the current flows and replaces cost parameters (used for warm-started sweeps).
    void set_cost_model(const CostModel& model);
    void set_observer(std::function<void(const InnerSnapshot&)> fn);

    // Individual steps, exposed for tests.
    void mode_split_pass();
    void matching_pass();
    void bush_update_pass();
    void route_pass();
    void group_pass();
    GapReport compute_gaps();
    ModalCosts compute_modal_costs();
    SolutionFlows snapshot() const;
    EquilibriumSolution report();
    const ALParams& al() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

EquilibriumSolution solve(const Problem& problem, const SolverConfig& config);

} // namespace seqbush
