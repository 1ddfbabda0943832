#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "desk.hpp"
#include "invariants.hpp"
#include "support.hpp"

#include "seqbush/assign.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace seqbush;
using namespace seqbush::testing;

namespace {

SolverConfig fixed_mode_config()
{
    SolverConfig c = illustrative_config().solver;
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

// Single-constraint projection by bisection on the multiplier: Z = max(0, y - lambda).
std::vector<double> project_simplex_cap(const std::vector<double>& y, double cap)
{
    auto sum_at = [&](double lam) {
        double s = 0.0;
        for (double v : y)
            s += std::max(0.0, v - lam);
        return s;
    };
    if (sum_at(0.0) <= cap) {
        std::vector<double> z(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            z[i] = std::max(0.0, y[i]);
        return z;
    }
    double lo = 0.0, hi = *std::max_element(y.begin(), y.end());
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (sum_at(mid) > cap ? lo : hi) = mid;
    }
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        z[i] = std::max(0.0, y[i] - hi);
    return z;
}

} // namespace

TEST_CASE("mode split step")
{
    SUBCASE("equal costs are a fixed point")
    {
        const ModalValues q{10, 20, 30, 40};
        CHECK(mode_split_step(q, {5, 5, 5, 5}, 1.0) == q);
    }
    SUBCASE("shift proportional to the cost gap")
    {
        const auto t = mode_split_step({100, 0, 0, 50}, {40, 1e9, 1e9, 10}, 1.0);
        CHECK(t[0] == doctest::Approx(70.0));
        CHECK(t[3] == doctest::Approx(80.0));
    }
    SUBCASE("shift clipped at the available demand")
    {
        const auto t = mode_split_step({10, 0, 0, 0}, {40, 50, 50, 10}, 1.0);
        CHECK(t[0] == 0.0);
        CHECK(t[3] == doctest::Approx(10.0));
    }
    SUBCASE("ties go to the lowest mode index")
    {
        const auto t = mode_split_step({0, 0, 10, 0}, {5, 5, 9, 9}, 1.0);
        CHECK(t[0] == doctest::Approx(4.0));
        CHECK(t[1] == 0.0);
    }
    SUBCASE("conservation and signs on random inputs")
    {
        std::mt19937 rng(1);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        for (int rep = 0; rep < 500; ++rep) {
            const ModalValues q{u(rng), u(rng), u(rng), u(rng)};
            const ModalValues c{u(rng), u(rng), u(rng), u(rng)};
            const auto t = mode_split_step(q, c, u(rng) / 10.0);
            CHECK(std::accumulate(t.begin(), t.end(), 0.0) ==
                  doctest::Approx(std::accumulate(q.begin(), q.end(), 0.0)));
            for (double v : t)
                CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("matching projection")
{
    MatchingSequence s;
    s.id = 0;
    s.driver = {1, 4};
    s.tasks = {{TaskKind::DriverDepart, 1, s.driver, -1},
               {TaskKind::Pickup, 2, {2, 3}, -1},
               {TaskKind::Dropoff, 3, {2, 3}, -1},
               {TaskKind::DriverArrive, 4, s.driver, -1}};
    refresh_sequence(s, nullptr);
    s.R = 1.0;

    SUBCASE("gradient step stops at the binding driver demand")
    {
        const std::map<OD, double> q_rd{{{1, 4}, 10.0}};
        const std::map<OD, double> q_rp{{{2, 3}, 100.0}};
        const double z0 = 7.0; // slack 3
        const auto z = project_matching({s}, {z0 + 5.0 * s.R}, q_rd, q_rp);
        CHECK(z[0] - z0 == doctest::Approx(3.0));
    }
    SUBCASE("reduced driver demand scales the quota down")
    {
        std::vector<MatchingSequence> pool{s, s, s};
        for (int i = 0; i < 3; ++i)
            pool[i].id = i;
        const std::vector<double> y{4.0, 2.0, 1.0};
        const std::map<OD, double> q_rd{{{1, 4}, 3.0}};
        const std::map<OD, double> q_rp{{{2, 3}, 100.0}};
        const auto z = project_matching(pool, y, q_rd, q_rp);
        const auto want = project_simplex_cap(y, 3.0);
        for (int i = 0; i < 3; ++i)
            CHECK(z[i] == doctest::Approx(want[i]).epsilon(1e-6));
        CHECK(z[0] + z[1] + z[2] <= 3.0 + 1e-9);
    }
    SUBCASE("projection is feasible and satisfies the obtuse-angle condition")
    {
        const auto in = load_inputs(illustrative_config());
        std::mt19937 rng(9);
        std::normal_distribution<double> g(0.0, 15000.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const std::map<OD, double> q_rd{{{1, 16}, 40000.0}};
        const std::map<OD, double> q_rp{{{4, 10}, 20000.0}, {{7, 13}, 20000.0}};
        auto feasible = [&](const std::vector<double>& z) {
            double d = 0.0, r1 = 0.0, r2 = 0.0;
            for (const auto& sq : in.pool) {
                if (z[sq.id] < -1e-7)
                    return false;
                d += z[sq.id];
                r1 += sq.passenger_count({4, 10}) * z[sq.id];
                r2 += sq.passenger_count({7, 13}) * z[sq.id];
            }
            return d <= 40000.0 + 1e-6 && r1 <= 20000.0 + 1e-6 && r2 <= 20000.0 + 1e-6;
        };
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> y(in.pool.size());
            for (double& v : y)
                v = g(rng);
            const auto p = project_matching(in.pool, y, q_rd, q_rp);
            CHECK(feasible(p));
            // For every feasible z: (y - p).(z - p) <= 0.
            for (int k = 0; k < 50; ++k) {
                std::vector<double> z(in.pool.size());
                for (double& v : z)
                    v = 2000.0 * u(rng);
                if (!feasible(z))
                    continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < z.size(); ++i)
                    dot += (y[i] - p[i]) * (z[i] - p[i]);
                CHECK(dot <= 1e-3 * (1.0 + std::abs(dot)));
            }
        }
    }
    SUBCASE("greedy quota is feasible")
    {
        const auto in = load_inputs(illustrative_config());
        const std::map<OD, double> q_rd{{{1, 16}, 40000.0}};
        const std::map<OD, double> q_rp{{{4, 10}, 20000.0}, {{7, 13}, 20000.0}};
        const auto z = greedy_matching(in.pool, q_rd, q_rp);
        double d = 0.0, objective = 0.0;
        for (const auto& sq : in.pool) {
            CHECK(z[sq.id] >= 0.0);
            d += z[sq.id];
            objective += sq.R * z[sq.id];
        }
        CHECK(d <= 40000.0);
        // Serving both passenger ODs completely.
        CHECK(objective == doctest::Approx(800000.0));
    }
}

TEST_CASE("augmented Lagrangian pieces")
{
    CHECK(al_value({1.0, 2.0}, 0.0, {3.0, -1.0}) == doctest::Approx(1.0));
    CHECK(al_value({0.0}, 2.0, {1.0}) == doctest::Approx(1.0));
    CHECK(al_value({0.0}, 2.0, {-1.0}) == 0.0);

    ALParams al;
    al.rho = 1.0;
    al.mu = {0.0, 0.0};
    update_al(al, {-1.0, 0.0});
    CHECK(al.mu == std::vector<double>{0.0, 0.0});

    ALParams one;
    one.rho = 1.0;
    one.mu = {0.0};
    update_al(one, {2.0});
    CHECK(one.mu[0] == 2.0);

    SUBCASE("penalty grows when the violation does not contract")
    {
        ALParams t;
        t.rho = 1.0;
        t.mu = {0.0};
        update_al(t, {4.0});
        CHECK(t.rho == 1.0);
        update_al(t, {2.0}); // 2 >= 0.25 * 4
        CHECK(t.rho == 2.0);
        update_al(t, {0.1}); // 0.1 < 0.25 * 2
        CHECK(t.rho == 2.0);
    }
}

TEST_CASE("route gap")
{
    // 10 of 100 units on a route 3 above the cheapest.
    CHECK(route_gap({90.0, 10.0}, {7.0, 10.0}) / 100.0 == doctest::Approx(0.3));
    CHECK(route_gap({50.0, 50.0}, {7.0, 7.0}) == 0.0);
}

TEST_CASE("illustrative equilibrium")
{
    const auto cfg = illustrative_config();
    const auto in = load_inputs(cfg);
    const Problem p = make_problem(cfg, in, true);
    EquilibriumSolver solver(p, fixed_mode_config());
    solver.initialize();
    int snapshots = 0;
    std::string failure;
    solver.set_observer([&](const InnerSnapshot& s) {
        ++snapshots;
        const auto r = check_invariants(*s.net, *s.pool, *s.flows);
        const double scale = s.flows->total_demand();
        if (failure.empty() && (r.conservation > 1e-9 * scale || r.coupling > 1e-9 * scale ||
                                r.negativity > 1e-9 * scale || !s.bushes_acyclic))
            failure = "iteration " + std::to_string(s.inner_iteration) + ": " + r.first_failure;
    });
    const auto sol = solver.solve();
    CHECK(failure.empty());
    CHECK(snapshots > 0);
    REQUIRE(sol.converged);
    CHECK(sol.inner_iterations <= 500);
    CHECK(sol.outer_iterations <= 5);

    const auto* n1 = find_sequence(sol, "(1,4,7,10,13,16)", 2);
    REQUIRE(n1);
    CHECK(n1->F == doctest::Approx(20000.0).epsilon(0.01));
    CHECK(n1->rd_cost == doctest::Approx(310.0).epsilon(0.01));
    CHECK(n1->generalized_cost == doctest::Approx(370.0).epsilon(0.01));
    for (const auto& [od, c] : n1->rider_costs)
        CHECK(c == doctest::Approx(108.0).epsilon(0.01));
    const auto* drv = find_od(sol, {1, 16});
    REQUIRE(drv);
    CHECK(drv->flows.quit_rd == doctest::Approx(20000.0).epsilon(0.01));
    CHECK(drv->cost[static_cast<int>(Mode::DA)] == doctest::Approx(370.0).epsilon(0.01));

    const auto x = sol.flows.vehicle_flows(in.net.link_count());
    int active = 0;
    for (int a = 0; a < in.net.link_count(); ++a)
        if (x[a] > 1.0) {
            ++active;
            CHECK(x[a] == doctest::Approx(20000.0).epsilon(0.005));
            CHECK(sol.costs.time[a] == doctest::Approx(17.0).epsilon(0.005));
        }
    CHECK(active > 0);
    CHECK(!any_positive_cycle(in.net, sol.flows, 1e-6 * sol.flows.total_demand()));
}

TEST_CASE("zero demand converges immediately")
{
    const Network net = make_network(3, {{1, 2, 1}, {2, 3, 1}});
    Problem p;
    p.net = &net;
    p.model = default_cost_model();
    p.demand.entries.clear();
    const auto sol = seqbush::solve(p, SolverConfig{});
    CHECK(sol.converged);
    CHECK(sol.inner_iterations == 0);
    for (double v : sol.flows.vehicle_flows(net.link_count()))
        CHECK(v == 0.0);
}

TEST_CASE("no ridesharing without a price for the ride")
{
    // Carrying a rider costs the driver more than driving alone while the rider would gain, so
    // only a transfer could make a match stable.
    const auto in = load_inputs(illustrative_config());
    Problem p;
    p.net = &in.net;
    p.model = time_plus_constant(10.0, 10.0, 14.0, 5.0, 11.0);
    p.model.pt_time = PtTimeSource::FreeFlow;
    p.pool = in.pool;
    p.demand.entries = {{{1, 16}, 24000.0}, {{4, 10}, 12000.0}, {{7, 13}, 12000.0}};
    SolverConfig c;
    c.mode_choice = true;
    c.eps_m = c.eps_n = 1e-4;
    const auto sol = seqbush::solve(p, c);
    CHECK(sol.converged);
    double matched = 0.0;
    for (double f : sol.flows.F)
        matched += f;
    CHECK(matched <= 1e-3 * sol.flows.total_demand());
    double da = 0.0;
    for (const auto& [od, f] : sol.flows.od)
        da += f.q[0];
    CHECK(da > 0.0);
}

TEST_CASE("invariants hold on random desk instances with mode choice")
{
    std::mt19937 rng(23);
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = random_desk_instance(rng);
        Problem p = d.problem();
        SolverConfig c;
        c.mode_choice = rep % 2 == 0;
        c.inner_cap = 300;
        c.outer_cap = 4;
        EquilibriumSolver solver(p, c);
        solver.initialize();
        bool ok = true;
        std::string what;
        solver.set_observer([&](const InnerSnapshot& s) {
            const auto r = check_invariants(*s.net, *s.pool, *s.flows);
            const double scale = s.flows->total_demand();
            if (r.conservation > 1e-9 * scale || r.coupling > 1e-9 * scale || r.negativity > 1e-9 * scale ||
                !s.bushes_acyclic) {
                if (ok)
                    what = r.first_failure;
                ok = false;
            }
        });
        const auto sol = solver.solve();
        CAPTURE(rep);
        CAPTURE(what);
        CHECK(ok);
        for (std::size_t n = 0; n < sol.flows.F.size(); ++n)
            CHECK(sol.flows.F[n] <= sol.flows.Z[n] + 1e-2 * sol.flows.total_demand());
    }
}

TEST_CASE("warm start after a cost change")
{
    const auto cfg = illustrative_config();
    const auto in = load_inputs(cfg);
    EquilibriumSolver solver(make_problem(cfg, in, true), fixed_mode_config());
    solver.initialize();
    const auto first = solver.solve();
    REQUIRE(first.converged);
    CostModel m = cfg.model;
    m.params(Mode::RD).fixed_loaded = 12.0;
    solver.set_cost_model(m);
    const auto second = solver.solve();
    CHECK(second.converged);
    const auto* n1 = find_sequence(second, "(1,4,7,10,13,16)", 2);
    REQUIRE(n1);
    // Two loaded links per loaded level cost 2 more each.
    CHECK(n1->rd_cost == doctest::Approx(310.0 + 3 * 2 * 2.0).epsilon(0.01));
}
