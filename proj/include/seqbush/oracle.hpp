#pragma once

// Brute-force reference equilibrium over enumerated routes and a residual checker for candidate
// solutions. Nothing here depends on the bush machinery or the solver.

#include "seqbush/hypernet.hpp"
#include "seqbush/matchgen.hpp"
#include "seqbush/netio.hpp"

#include <map>
#include <string>
#include <vector>

namespace seqbush::oracle {

using Path = std::vector<int>; // link indices

/// All simple paths from o to d with at most `hop_limit` links, in DFS order (out-links by index).
/// Trips through non-thru nodes other than o are not expanded.
std::vector<Path> enumerate_paths(const Network& net, int o, int d, int hop_limit);

/// Raised when an enumeration would exceed its budget. `estimate` is a lower bound on the count.
class EnumerationBudgetExceeded : public ValidationError {
public:
    EnumerationBudgetExceeded(const std::string& what, double estimate)
        : ValidationError(what), estimate_(estimate) {}
    double estimate() const { return estimate_; }

private:
    double estimate_;
};

struct SequenceRouteSet {
    std::vector<std::vector<Path>> level_paths; // per level; a virtual level has one empty path
    std::vector<std::vector<int>> routes;       // choice index per level for each full route
    double count() const;
};

/// Per-level path sets and their Cartesian product. Throws ValidationError when some level has no
/// path within the hop limit and EnumerationBudgetExceeded when the product exceeds `budget`.
SequenceRouteSet enumerate_sequence_routes(const MatchingSequence& seq, const Network& net, int hop_limit,
                                           double budget = 1e6);

struct LinearProgram {
    // minimize c.x  s.t.  A_le x <= b_le,  A_eq x = b_eq,  0 <= x <= upper (upper < 0: unbounded)
    std::vector<double> c;
    std::vector<std::vector<double>> A_le;
    std::vector<double> b_le;
    std::vector<std::vector<double>> A_eq;
    std::vector<double> b_eq;
    std::vector<double> upper;
};

struct LpResult {
    bool feasible = false;
    bool bounded = true;
    double objective = 0.0;
    std::vector<double> x;
};

/// Dense two-phase simplex with Bland's rule. Intended for the small problems of this module.
LpResult solve_lp(const LinearProgram& lp);

struct Instance {
    const Network* net = nullptr;
    CostModel model;
    std::vector<MatchingSequence> pool;
    ModalDemandTable demand; // fixed modal demand per OD
    std::vector<double> Z;   // matching quota per sequence
};

struct BruteForceOptions {
    int hop_limit = 10;
    double route_budget = 2e4; // level paths per sequence
    int max_iterations = 20000;
    int min_iterations = 50;
    double tolerance = 1e-4; // on the normalized residuals of the iterate
};

struct BruteForceResult {
    SolutionFlows flows;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
};

/// Method of successive averages over enumerated DA/PT paths, enumerated level paths and the
/// drivers' option split. The option split best response is a linear program over quit and sequence
/// flows with rider availability and the quotas Z as hard limits.
BruteForceResult brute_force_equilibrium(const Instance& inst, const BruteForceOptions& opt = {});

struct Residual {
    std::string family;
    double violation = 0.0; // normalized
    std::string witness;
    bool checked = true;
};

struct ResidualReport {
    std::vector<Residual> families;
    double max_violation() const;
    bool passes(double tol) const;
    const Residual* find(const std::string& family) const;
    std::string to_text() const;
};

struct VerifyInput {
    const Network* net = nullptr;
    CostModel model;
    const std::vector<MatchingSequence>* pool = nullptr;
    const SolutionFlows* flows = nullptr;
    bool endogenous_modes = false; // check mode complementarity
    int capacity = 2;
};

/// Evaluates conservation, coupling, transfer-avoidance, capacity, stability, Wardrop, mode
/// complementarity, positive-flow cycle and platform-optimality residuals.
ResidualReport verify_solution(const VerifyInput& in);

} // namespace seqbush::oracle
