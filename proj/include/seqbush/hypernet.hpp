#pragma once

// Level-indexed hyper-network: flow classes, level ODs, node injections, link cost layers and the
// solver-neutral solution container shared by the solver and the verifier.

#include "seqbush/matchgen.hpp"
#include "seqbush/netio.hpp"

#include <map>
#include <vector>

namespace seqbush {

struct LevelOD {
    int level = 0; // 1..L
    int o = 0;
    int d = 0;
    bool is_virtual() const { return o == d; }
};

std::vector<LevelOD> level_ods(const MatchingSequence& seq);

enum class ClassKind { DASolo, PTSolo, RPQuit, RD, RP };

/// Flow class (n, l, tag). Solo classes use seq = -1 and level = 1.
struct FlowClass {
    ClassKind kind = ClassKind::DASolo;
    int seq = -1;
    int level = 1;
    int tag = 0; // RD: B value; RP: first on-board level u; solo classes: 0 (RP quit: 1)
    int passenger = -1; // index into the sequence's passenger list for RP classes
    auto operator<=>(const FlowClass&) const = default;
};

struct ODClassSets {
    std::vector<FlowClass> rd;
    std::vector<FlowClass> rp;
    FlowClass da{ClassKind::DASolo, -1, 1, 0, -1};
    FlowClass pt{ClassKind::PTSolo, -1, 1, 0, -1};
    FlowClass rp_quit{ClassKind::RPQuit, -1, 1, 1, -1};
};

/// Class sets per OD. Every OD in `ods` receives its solo classes even without sequences.
std::map<OD, ODClassSets> build_flow_classes(const std::vector<MatchingSequence>& pool, const std::vector<OD>& ods);

struct Injection {
    FlowClass cls;
    OD owner;
    int node = 0;
    double amount = 0.0;
};

/// Node injections p_j for every class: +flow at the class origin and -flow at its destination.
/// `solo` holds per-OD solo flows: [DA, PT, RP quit].
std::vector<Injection> sequence_demand_vector(const std::vector<MatchingSequence>& pool, const std::vector<double>& F,
                                              const std::map<OD, ODClassSets>& classes,
                                              const std::map<OD, std::array<double, 3>>& solo);

/// Cost layer used for a level carrying `onboard` passengers: the RD and every on-board RP share the
/// route, so the layer cost is RD (empty or loaded) plus onboard times the RP class cost.
ClassCoeffs layer_coeffs(const CostModel& model, int onboard);

/// Per-link times and class costs for a given vehicular loading.
struct LinkCosts {
    std::vector<double> time;
    std::vector<double> dtime; // d time / d vehicles
    std::vector<double> pt_time;
    std::vector<double> da;
    std::vector<double> pt;
    std::vector<std::vector<double>> layer; // by onboard count
    std::vector<double> layer_a;            // time coefficient by onboard count
    double da_a = 0.0;
    double pt_a = 0.0;

    void evaluate(const Network& net, const CostModel& model, const std::vector<double>& vehicles, int max_onboard);
    /// Re-evaluates one link after evaluate() has set up the layers.
    void update_link(const Network& net, const CostModel& model, int a, double vehicles);
    /// Class cost for one passenger of mode RP, RD with the given B tag, etc. on link `a`.
    double class_cost(const Network& net, const CostModel& model, LinkClass cls, int a) const;
};

/// Solver-neutral equilibrium description: per-OD mode split, sequence flows and link-flow layers.
struct ODFlows {
    double demand = 0.0;
    ModalValues q{}; // DA, RD, RP, PT as chosen modes
    double quit_rd = 0.0; // RD demand not matched, travelling as DA
    double quit_rp = 0.0; // RP demand not matched, travelling by PT
};

struct SolutionFlows {
    std::map<OD, ODFlows> od;
    std::vector<double> F;
    std::vector<double> Z;
    std::vector<double> mu;
    double rho = 0.0;
    // level_flows[n][l-1]: link vehicle flow of sequence n on level l (empty when unused / virtual).
    std::vector<std::vector<std::vector<double>>> level_flows;
    // Origin-based link flows of solo DA (including quitting RD) and PT (including quitting RP).
    std::map<int, std::vector<double>> da_flows;
    std::map<int, std::vector<double>> pt_flows;

    std::vector<double> vehicle_flows(int link_count) const;
    std::vector<double> pt_link_flows(int link_count) const;
    /// RD vehicles counted as matched per OD as driver, and RP riders matched per OD.
    double matched_drivers(const std::vector<MatchingSequence>& pool, const OD& od) const;
    double matched_riders(const std::vector<MatchingSequence>& pool, const OD& od) const;
    double total_demand() const;
};

} // namespace seqbush
