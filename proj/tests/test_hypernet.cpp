#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "seqbush/hypernet.hpp"

#include <algorithm>
#include <random>

using namespace seqbush;

namespace {

struct Illustrative {
    ScenarioInputs in = load_inputs(seqbush::testing::illustrative_config());
    const MatchingSequence& by_label(const std::string& label, std::size_t riders = 2) const
    {
        for (const auto& s : in.pool)
            if (s.label() == label && s.passengers.size() == riders)
                return s;
        throw std::runtime_error("no sequence " + label);
    }
};

double injected(const std::vector<Injection>& inj, const FlowClass& c, int node)
{
    double s = 0.0;
    for (const auto& i : inj)
        if (i.cls == c && i.node == node)
            s += i.amount;
    return s;
}

} // namespace

TEST_CASE("level ODs chain the task nodes")
{
    Illustrative ill;
    const auto& n1 = ill.by_label("(1,4,7,10,13,16)");
    const auto lv = level_ods(n1);
    REQUIRE(lv.size() == 5);
    const std::vector<std::pair<int, int>> want{{1, 4}, {4, 7}, {7, 10}, {10, 13}, {13, 16}};
    for (std::size_t l = 0; l < lv.size(); ++l) {
        CHECK(lv[l].level == static_cast<int>(l) + 1);
        CHECK(std::make_pair(lv[l].o, lv[l].d) == want[l]);
        if (l > 0)
            CHECK(lv[l].o == lv[l - 1].d);
    }
    const auto& n5 = ill.by_label("(1,4,4,10,10,16)");
    const auto v = level_ods(n5);
    CHECK(v[1].is_virtual());
    CHECK(v[1].o == 4);
    CHECK(v[3].is_virtual());

    MatchingSequence solo;
    solo.driver = {3, 9};
    solo.tasks = {{TaskKind::DriverDepart, 3, solo.driver, -1}, {TaskKind::DriverArrive, 9, solo.driver, -1}};
    refresh_sequence(solo, nullptr);
    const auto s = level_ods(solo);
    REQUIRE(s.size() == 1);
    CHECK(s[0].o == 3);
    CHECK(s[0].d == 9);
}

TEST_CASE("flow classes")
{
    Illustrative ill;
    const auto& n1 = ill.by_label("(1,4,7,10,13,16)");
    const auto classes = build_flow_classes(ill.in.pool, {OD{1, 16}, OD{4, 10}, OD{7, 13}, OD{2, 3}});

    std::vector<int> tags;
    for (const auto& c : classes.at(OD{1, 16}).rd)
        if (c.seq == n1.id)
            tags.push_back(c.tag);
    CHECK(tags == std::vector<int>{-1, 0, 0, 0, -1});

    std::vector<std::pair<int, int>> span;
    for (const auto& c : classes.at(OD{4, 10}).rp)
        if (c.seq == n1.id)
            span.push_back({c.level, c.tag});
    CHECK(span == std::vector<std::pair<int, int>>{{2, 2}, {3, 2}});

    const auto& none = classes.at(OD{2, 3});
    CHECK(none.rd.empty());
    CHECK(none.rp.empty());
    CHECK(none.da.kind == ClassKind::DASolo);
    CHECK(none.pt.kind == ClassKind::PTSolo);
    CHECK(none.rp_quit.kind == ClassKind::RPQuit);

    // Every sequence contributes one driver class per level.
    std::size_t rd = 0;
    for (const auto& s : ill.in.pool)
        rd += static_cast<std::size_t>(s.level_count());
    CHECK(classes.at(OD{1, 16}).rd.size() == rd);
}

TEST_CASE("node injections")
{
    Illustrative ill;
    const auto& n1 = ill.by_label("(1,4,7,10,13,16)");
    const std::vector<OD> ods{OD{1, 16}, OD{4, 10}, OD{7, 13}};
    const auto classes = build_flow_classes(ill.in.pool, ods);
    std::vector<double> F(ill.in.pool.size(), 0.0);
    F[n1.id] = 20000.0;
    const std::map<OD, std::array<double, 3>> solo{{OD{1, 16}, {20000.0, 0.0, 0.0}}};
    const auto inj = sequence_demand_vector(ill.in.pool, F, classes, solo);

    const FlowClass level2{ClassKind::RD, n1.id, 2, 0, -1};
    CHECK(injected(inj, level2, 4) == 20000.0);
    CHECK(injected(inj, level2, 7) == -20000.0);
    const auto& da = classes.at(OD{1, 16}).da;
    CHECK(injected(inj, da, 1) == 20000.0);
    CHECK(injected(inj, da, 16) == -20000.0);

    // Rider (4,10) on n1: enters at 4 on level 2, leaves at 10 on level 3.
    const FlowClass r2{ClassKind::RP, n1.id, 2, 2, 0};
    const FlowClass r3{ClassKind::RP, n1.id, 3, 2, 0};
    CHECK(injected(inj, r2, 4) == 20000.0);
    CHECK(injected(inj, r3, 10) == -20000.0);

    for (const auto& i : inj)
        if (i.cls.seq >= 0 && i.cls.seq != n1.id)
            CHECK(i.amount == 0.0);
}

TEST_CASE("injections balance for every class and random flows")
{
    Illustrative ill;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    const std::vector<OD> ods{OD{1, 16}, OD{4, 10}, OD{7, 13}};
    const auto classes = build_flow_classes(ill.in.pool, ods);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> F(ill.in.pool.size());
        for (double& f : F)
            f = u(rng);
        std::map<OD, std::array<double, 3>> solo;
        for (const OD& od : ods)
            solo[od] = {u(rng), u(rng), u(rng)};
        const auto inj = sequence_demand_vector(ill.in.pool, F, classes, solo);
        std::map<std::pair<OD, FlowClass>, double> balance;
        for (const auto& i : inj)
            balance[{i.owner, i.cls}] += i.amount;
        // Rider classes balance over their whole span, every other class per level.
        std::map<std::tuple<OD, int, int>, double> rider;
        for (const auto& [key, v] : balance) {
            if (key.second.kind == ClassKind::RP)
                rider[{key.first, key.second.seq, key.second.passenger}] += v;
            else
                CHECK(v == doctest::Approx(0.0));
        }
        for (const auto& [key, v] : rider)
            CHECK(v == doctest::Approx(0.0));
    }
}

TEST_CASE("cost layers")
{
    const CostModel m = default_cost_model();
    const auto empty = layer_coeffs(m, 0);
    CHECK(empty.a == m.coeffs(LinkClass::RDEmpty).a);
    const auto two = layer_coeffs(m, 2);
    CHECK(two.a == doctest::Approx(m.coeffs(LinkClass::RDLoaded).a + 2 * m.coeffs(LinkClass::RP).a));
    CHECK(two.b == doctest::Approx(m.coeffs(LinkClass::RDLoaded).b + 2 * m.coeffs(LinkClass::RP).b));
    CHECK_THROWS_AS(layer_coeffs(m, -1), ContractError);

    // The illustrative loaded layer with two riders costs 3t + 30 per link.
    const CostModel ill = seqbush::testing::time_plus_constant(20, 20, 10, 10, 15);
    CHECK(layer_coeffs(ill, 2)(17.0, 5.0) == doctest::Approx(81.0));
}

TEST_CASE("link cost evaluation agrees with class costs")
{
    const Network net = load_tntp_network(seqbush::testing::source_path("data/siouxfalls/SiouxFalls_net.tntp"));
    CostModel m = default_cost_model();
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 20000.0);
    std::vector<double> x(net.link_count());
    for (double& v : x)
        v = u(rng);
    LinkCosts c;
    c.evaluate(net, m, x, 2);
    for (int a = 0; a < net.link_count(); ++a) {
        const double t = link_travel_time(net.links[a], x[a]);
        CHECK(c.time[a] == doctest::Approx(t));
        CHECK(c.da[a] == doctest::Approx(class_link_cost(net.links[a], LinkClass::DA, t, m)));
        CHECK(c.pt[a] == doctest::Approx(class_link_cost(net.links[a], LinkClass::PT, t, m)));
        // Free-flow transit ignores congestion.
        CHECK(c.pt_time[a] == doctest::Approx(net.links[a].free_flow_time));
        CHECK(c.layer[1][a] == doctest::Approx(layer_coeffs(m, 1)(t, net.links[a].length)));
    }
    x[0] += 5000.0;
    c.update_link(net, m, 0, x[0]);
    CHECK(c.time[0] == doctest::Approx(link_travel_time(net.links[0], x[0])));
}

TEST_CASE("solution flow aggregation")
{
    SolutionFlows f;
    f.od[OD{1, 2}] = ODFlows{10.0, {4.0, 3.0, 2.0, 1.0}, 1.0, 0.5};
    f.F = {2.0};
    f.level_flows = {{{2.0, 0.0}, {}}};
    f.da_flows[1] = {5.0, 1.0};
    f.pt_flows[1] = {0.0, 1.5};
    const auto x = f.vehicle_flows(2);
    CHECK(x[0] == 7.0);
    CHECK(x[1] == 1.0);
    CHECK(f.pt_link_flows(2)[1] == 1.5);
    CHECK(f.total_demand() == 10.0);
}
