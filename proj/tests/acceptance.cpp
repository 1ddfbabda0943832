// Acceptance runner: one PASS/FAIL line per criterion. The exit status reflects the gating criteria;
// the Sioux Falls reproduction band is reported but never gates.

#include "desk.hpp"
#include "invariants.hpp"
#include "reference_pool.hpp"
#include "support.hpp"

#include "seqbush/assign.hpp"
#include "seqbush/oracle.hpp"
#include "seqbush/scenario.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace seqbush;
using namespace seqbush::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    bool gating;
    bool extended;
    std::function<Outcome()> run;
};

bool within_rel(double v, double want, double rel) { return std::abs(v - want) <= rel * std::abs(want); }

std::string fmt(double v, int prec = 4)
{
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

// Collects failures while keeping the first few for the report line.
struct Checks {
    bool ok = true;
    std::vector<std::string> notes;
    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            if (notes.size() < 4)
                notes.push_back(what);
        }
    }
    Outcome outcome(const std::string& summary) const
    {
        std::string d = summary;
        for (const auto& n : notes)
            d += "; " + n;
        return {ok, d};
    }
};

SolverConfig fixed_modes(SolverConfig c)
{
    c.mode_choice = false;
    return c;
}

const SequenceReport* find_sequence(const EquilibriumSolution& sol, const std::string& label, std::size_t riders)
{
    for (const auto& s : sol.sequences)
        if (s.label == label && s.rider_costs.size() == riders)
            return &s;
    return nullptr;
}

const ODReport* find_od(const EquilibriumSolution& sol, const OD& od)
{
    for (const auto& o : sol.ods)
        if (o.od == od)
            return &o;
    return nullptr;
}

Outcome illustrative_regression()
{
    const auto cfg = illustrative_config();
    const auto in = load_inputs(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = seqbush::solve(make_problem(cfg, in, true), fixed_modes(cfg.solver));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Checks c;
    c.expect(sol.converged, "not converged");
    const auto* n1 = find_sequence(sol, "(1,4,7,10,13,16)", 2);
    const auto* drv = find_od(sol, {1, 16});
    if (!n1 || !drv)
        return {false, "sequence n1 or driver OD missing"};
    c.expect(within_rel(n1->F, 20000.0, 0.01), "F " + fmt(n1->F));
    c.expect(within_rel(drv->flows.quit_rd, 20000.0, 0.01), "quit " + fmt(drv->flows.quit_rd));
    c.expect(within_rel(n1->rd_cost, 310.0, 0.01), "RD cost " + fmt(n1->rd_cost));
    c.expect(within_rel(drv->cost[static_cast<int>(Mode::DA)], 370.0, 0.01),
             "quit cost " + fmt(drv->cost[static_cast<int>(Mode::DA)]));
    for (const auto& [od, rc] : n1->rider_costs)
        c.expect(within_rel(rc, 108.0, 0.01), "RP cost " + fmt(rc));
    for (const OD& r : {OD{4, 10}, OD{7, 13}}) {
        const double m = sol.flows.matched_riders(in.pool, r);
        c.expect(within_rel(m, 20000.0, 0.01), "RP flow " + to_string(r) + " " + fmt(m));
    }
    const auto x = sol.flows.vehicle_flows(in.net.link_count());
    int active = 0;
    for (int a = 0; a < in.net.link_count(); ++a)
        if (x[a] > 1.0) {
            ++active;
            c.expect(within_rel(x[a], 20000.0, 0.005), "link flow " + fmt(x[a]));
            c.expect(within_rel(sol.costs.time[a], 17.0, 0.005), "link time " + fmt(sol.costs.time[a]));
        }
    c.expect(active > 0, "no active links");
    c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
    return c.outcome("F " + fmt(n1->F, 6) + ", quit " + fmt(drv->flows.quit_rd, 6) + ", RD " + fmt(n1->rd_cost, 5)
                     + ", quit cost " + fmt(drv->cost[0], 5) + ", RP " + fmt(n1->rider_costs.front().second, 5)
                     + ", " + std::to_string(active) + " active links, " + fmt(secs, 3) + " s");
}

Outcome sequence_count()
{
    const auto cfg = illustrative_config();
    const auto in = load_inputs(cfg);
    const SkimMatrix sk = free_flow_skims(in.net);
    Checks c;
    c.expect(in.pool.size() == 12, "pool size " + std::to_string(in.pool.size()));
    GenerationOptions opt = cfg.pool.generation;
    opt.capacity = 1;
    const std::vector<OD> riders{{4, 10}, {7, 13}};
    const auto got = generated_pool({1, 16}, riders, opt, sk);
    const auto want = reference_pool({1, 16}, riders, 1, opt.max_passengers, opt.detour_factor, sk);
    c.expect(got == want, "cap-1 pool differs from the interleaving enumeration");
    return c.outcome(std::to_string(in.pool.size()) + " sequences; cap-1 pool " + std::to_string(got.size())
                     + " vs enumeration " + std::to_string(want.size()));
}

Outcome convergence_contract()
{
    const auto cfg = illustrative_config();
    const auto in = load_inputs(cfg);
    const auto sol = seqbush::solve(make_problem(cfg, in, true), fixed_modes(cfg.solver));
    const auto& g = sol.final_gap;
    Checks c;
    c.expect(sol.converged, "not converged");
    c.expect(g.G_M <= 1e-2 && g.G_N <= 1e-2, "inner gaps");
    c.expect(sol.inner_iterations <= 500, "inner iterations");
    c.expect(g.al_ratio <= 5e-3, "AL ratio");
    c.expect(sol.outer_iterations <= 5, "outer iterations");
    return c.outcome("G_M " + fmt(g.G_M) + ", G_N " + fmt(g.G_N) + " after " + std::to_string(sol.inner_iterations)
                     + " inner; AL ratio " + fmt(g.al_ratio) + " after " + std::to_string(sol.outer_iterations)
                     + " outer");
}

Outcome oracle_equivalence()
{
    std::mt19937 rng(2024);
    const int instances = 6;
    double worst_diff = 0.0, worst_resid = 0.0, min_matched = 1.0;
    Checks c;
    for (int k = 0; k < instances; ++k) {
        const auto d = random_desk_instance(rng);
        const Problem p = d.problem();
        SolverConfig sc;
        sc.mode_choice = false;
        sc.eps_m = sc.eps_n = 1e-5;
        sc.eps_3 = 1e-5;
        const auto sol = seqbush::solve(p, sc);
        c.expect(sol.converged, "instance " + std::to_string(k) + " not converged");
        c.expect(d.net->node_count <= 16 && d.pool.size() <= 3, "instance " + std::to_string(k) + " too large");

        oracle::Instance inst;
        inst.net = d.net.get();
        inst.model = d.model;
        inst.pool = d.pool;
        inst.demand = d.modal;
        inst.Z = sol.flows.Z;
        oracle::BruteForceOptions bo;
        bo.tolerance = 1e-6;
        bo.max_iterations = 50000;
        const auto ref = oracle::brute_force_equilibrium(inst, bo);

        const double total = sol.flows.total_demand();
        double matched = 0.0;
        for (double f : sol.flows.F)
            matched += f;
        min_matched = std::min(min_matched, matched / total);
        double diff = 0.0;
        for (std::size_t n = 0; n < d.pool.size(); ++n)
            diff = std::max(diff, std::abs(sol.flows.F[n] - ref.flows.F[n]));
        for (const auto& [od, f] : sol.flows.od) {
            const auto& r = ref.flows.od.at(od);
            diff = std::max({diff, std::abs(f.quit_rd - r.quit_rd), std::abs(f.quit_rp - r.quit_rp)});
        }
        const auto x = sol.flows.vehicle_flows(d.net->link_count());
        const auto y = ref.flows.vehicle_flows(d.net->link_count());
        for (int a = 0; a < d.net->link_count(); ++a)
            diff = std::max(diff, std::abs(x[a] - y[a]));
        worst_diff = std::max(worst_diff, diff / total);
        c.expect(diff <= 0.01 * total, "instance " + std::to_string(k) + " differs by " + fmt(diff / total));

        oracle::VerifyInput v;
        v.net = d.net.get();
        v.model = d.model;
        v.pool = &d.pool;
        v.flows = &sol.flows;
        v.capacity = d.capacity;
        const auto rep = oracle::verify_solution(v);
        worst_resid = std::max(worst_resid, rep.max_violation());
        const auto* st = rep.find("stability");
        c.expect(st && st->checked, "stability family missing");
        c.expect(rep.passes(1e-2), "instance " + std::to_string(k) + " residuals " + fmt(rep.max_violation()));
    }
    return c.outcome(std::to_string(instances) + " instances; smallest matched share " + fmt(min_matched)
                     + "; max flow difference " + fmt(worst_diff) + " of demand; max residual " + fmt(worst_resid));
}

Outcome invariant_suite()
{
    struct Run {
        std::string name;
        Problem problem;
        SolverConfig config;
    };
    const auto cfg = illustrative_config();
    const auto ill = load_inputs(cfg);
    std::vector<Run> runs;
    runs.push_back({"illustrative", make_problem(cfg, ill, true), fixed_modes(cfg.solver)});
    std::mt19937 rng(77);
    std::vector<DeskInstance> desks;
    for (int k = 0; k < 4; ++k)
        desks.push_back(random_desk_instance(rng));
    for (std::size_t k = 0; k < desks.size(); ++k) {
        SolverConfig sc;
        sc.mode_choice = k % 2 == 0;
        runs.push_back({"desk " + std::to_string(k), desks[k].problem(), sc});
    }
    Checks c;
    long snapshots = 0;
    for (const auto& r : runs) {
        EquilibriumSolver solver(r.problem, r.config);
        solver.initialize();
        std::string failure;
        solver.set_observer([&](const InnerSnapshot& s) {
            ++snapshots;
            const auto inv = check_invariants(*s.net, *s.pool, *s.flows);
            const double scale = s.flows->total_demand();
            if (failure.empty() && (inv.conservation > 1e-9 * scale || inv.coupling > 1e-9 * scale
                                    || inv.negativity > 1e-9 * scale || !s.bushes_acyclic))
                failure = "iteration " + std::to_string(s.inner_iteration) + ": "
                          + (s.bushes_acyclic ? inv.first_failure : std::string("cyclic bush"));
        });
        const auto sol = solver.solve();
        c.expect(failure.empty(), r.name + " " + failure);
        c.expect(!any_positive_cycle(*r.problem.net, sol.flows, 1e-6 * sol.flows.total_demand()),
                 r.name + " positive-flow cycle at termination");
    }
    return c.outcome(std::to_string(runs.size()) + " runs, " + std::to_string(snapshots) + " inner snapshots checked");
}

ScenarioConfig siouxfalls_run_config()
{
    ScenarioConfig cfg = siouxfalls_config();
    cfg.verify = false;
    cfg.threads = 1;
    return cfg;
}

Outcome siouxfalls_reproduction()
{
    const auto cfg = siouxfalls_run_config();
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_scenario(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& g = rep.final_gap;
    const auto& s = rep.with_rs.shares;
    Checks c;
    c.expect(rep.converged && g.G_M <= 1e-2 && g.G_N <= 1e-2 && g.al_ratio <= 5e-3, "not converged");
    const double want[4] = {75.60, 1.54, 1.38, 21.49};
    const char* name[4] = {"DA", "RD", "RP", "PT"};
    std::string shares;
    for (int m = 0; m < 4; ++m) {
        shares += std::string(m ? ", " : "") + name[m] + " " + fmt(100.0 * s[m], 4) + "%";
        c.expect(std::abs(100.0 * s[m] - want[m]) <= 1.0, std::string(name[m]) + " share off band");
    }
    c.expect(std::abs(rep.vkt_saved_pct - 2.01) <= 0.75, "VKT saving off band");
    c.expect(secs <= 7200.0, "wall time");
    return c.outcome(shares + "; VKT saving " + fmt(rep.vkt_saved_pct, 4) + "%; " + fmt(secs, 4) + " s");
}

Outcome sensitivity_checks()
{
    auto cfg = siouxfalls_run_config();
    cfg.baseline = true;
    SweepSpec spec;
    spec.param = "nu_d_RD";
    spec.from = 0.0;
    spec.to = 1.0;
    spec.steps = 11;
    const auto points = run_sweep(cfg, spec);
    Checks c;
    std::vector<double> saving;
    std::string low;
    for (const auto& p : points) {
        if (!p.error.empty()) {
            c.expect(false, "nu " + fmt(p.value) + ": " + p.error);
            saving.push_back(0.0);
            continue;
        }
        c.expect(p.report.converged, "nu " + fmt(p.value) + " not converged");
        saving.push_back(p.report.vkt_saved_pct);
        if (p.value <= 0.1 + 1e-12) {
            const auto& s = p.report.with_rs.shares;
            low += (low.empty() ? "" : ", ") + std::string("nu ") + fmt(p.value) + ": RD " + fmt(100 * s[1]) + "% RP "
                   + fmt(100 * s[2]) + "%";
            c.expect(s[1] < 1e-3 && s[2] < 1e-3, "nu " + fmt(p.value) + " ridesharing share");
        }
    }
    // Unimodal: nondecreasing up to the peak, nonincreasing after it, with a rise and a fall.
    const double tol = 1e-6;
    std::size_t peak = 0;
    for (std::size_t i = 1; i < saving.size(); ++i)
        if (saving[i] > saving[peak])
            peak = i;
    bool unimodal = peak > 0 && peak + 1 < saving.size();
    for (std::size_t i = 1; i <= peak && unimodal; ++i)
        unimodal = saving[i] >= saving[i - 1] - tol;
    for (std::size_t i = peak + 1; i < saving.size() && unimodal; ++i)
        unimodal = saving[i] <= saving[i - 1] + tol;
    c.expect(unimodal, "VKT saving not unimodal");
    std::string curve;
    for (std::size_t i = 0; i < saving.size(); ++i)
        curve += (i ? " " : "") + fmt(saving[i], 3);
    return c.outcome(low + "; VKT saving % over the grid: " + curve);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria runner"};
    bool quick = false;
    std::vector<int> only;
    app.add_flag("--quick", quick, "Skip the Sioux Falls criteria");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "illustrative equilibrium regression", true, false, illustrative_regression},
        {2, "sequence count exactness", true, false, sequence_count},
        {3, "illustrative convergence contract", true, false, convergence_contract},
        {4, "oracle equivalence on desk instances", true, false, oracle_equivalence},
        {5, "invariants after every inner iteration", true, false, invariant_suite},
        {6, "Sioux Falls reproduction band (non-gating)", false, true, siouxfalls_reproduction},
        {7, "sensitivity to the ride price", true, true, sensitivity_checks},
    };
    bool gating_ok = true;
    for (const auto& cr : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end())
            continue;
        if (quick && cr.extended)
            continue;
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << cr.id << " " << (o.pass ? "PASS" : "FAIL") << ": " << cr.title << ": " << o.detail
                  << std::endl;
        if (cr.gating && !o.pass)
            gating_ok = false;
    }
    return gating_ok ? 0 : 1;
}
