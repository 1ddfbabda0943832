#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "seqbush/bush.hpp"

#include <cmath>
#include <random>

using namespace seqbush;
using seqbush::testing::make_network;

namespace {

Network illustrative_net()
{
    return load_tntp_network(seqbush::testing::source_path("data/illustrative/illustrative_net.tntp"));
}

int link(const Network& net, int t, int h)
{
    const int a = net.find_link(t, h);
    REQUIRE(a >= 0);
    return a;
}

// Label consistency: the min label of every reached non-root node is the best over incoming bush links.
void check_labels(const Bush& b, const Network& net, const std::vector<double>& cost)
{
    CHECK(b.is_acyclic(net));
    CHECK(b.min_label[b.root] == 0.0);
    for (int v : b.order) {
        if (v == b.root)
            continue;
        double best = std::numeric_limits<double>::infinity();
        for (int a : net.in_links[v])
            if (b.in_bush[a] && b.reaches(net.links[a].tail)) {
                CHECK(b.rank[net.links[a].tail] < b.rank[v]);
                best = std::min(best, b.min_label[net.links[a].tail] + cost[a]);
            }
        CHECK(b.min_label[v] == doctest::Approx(best));
    }
}

} // namespace

TEST_CASE("initial bush is the shortest path tree")
{
    const Network net = illustrative_net();
    const std::vector<double> cost(net.link_count(), 1.0);
    const Bush b = build_initial_bush(net, 4, cost);
    const Route r = min_route(b, net, 7);
    CHECK(r.links == std::vector<int>{link(net, 4, 5), link(net, 5, 7)});
    CHECK(r.cost == 2.0);
    check_labels(b, net, cost);
    const auto tree = dijkstra(net, 4, cost);
    for (int v = 1; v <= net.node_count; ++v)
        CHECK(b.min_label[v] == tree.dist[v]);
    // A tree has one incoming link per reached node.
    CHECK(b.link_count() == static_cast<int>(b.order.size()) - 1);
}

TEST_CASE("two-node bush")
{
    const Network net = make_network(2, {{1, 2, 3.0}});
    const std::vector<double> cost{3.0};
    const Bush b = build_initial_bush(net, 1, cost);
    CHECK(b.link_count() == 1);
    CHECK(b.min_label[2] == 3.0);
    const MaxLabels ml = max_labels(b, net, cost, {});
    CHECK(ml.label[2] == 3.0);
}

TEST_CASE("root without outgoing links")
{
    const Network net = make_network(2, {{1, 2, 3.0}});
    CHECK_THROWS_AS(build_initial_bush(net, 2, {3.0}, {1}), ValidationError);
}

TEST_CASE("chain and diamond labels")
{
    SUBCASE("chain")
    {
        const Network net = make_network(3, {{1, 2, 1.0}, {2, 3, 2.0}});
        const std::vector<double> cost{1.0, 2.0};
        const Bush b = build_initial_bush(net, 1, cost);
        CHECK(b.min_label[2] == 1.0);
        CHECK(b.min_label[3] == 3.0);
        const MaxLabels ml = max_labels(b, net, cost, {1.0, 1.0});
        CHECK(ml.label[3] == 3.0);
    }
    SUBCASE("diamond with flow on both branches")
    {
        // a=1, b=2, c=3, d=4
        const Network net = make_network(4, {{1, 2, 1.0}, {1, 3, 2.0}, {2, 4, 2.0}, {3, 4, 1.0}});
        const std::vector<double> cost{1.0, 2.0, 2.0, 1.0};
        Bush b = build_initial_bush(net, 1, cost);
        b.in_bush.assign(4, 1);
        set_labels(b, net, cost);
        CHECK(b.min_label[4] == 3.0);
        const std::vector<double> support{1.0, 1.0, 1.0, 1.0};
        const MaxLabels both = max_labels(b, net, {1.0, 2.0, 2.0, 2.0}, support);
        CHECK(both.label[4] == 4.0);
        CHECK(net.links[both.pred[4]].tail == 3);
        // Two sequences sharing one bush with disjoint supports see different max labels.
        const MaxLabels upper = max_labels(b, net, cost, {1.0, 0.0, 1.0, 0.0});
        const MaxLabels lower = max_labels(b, net, {1.0, 2.0, 2.0, 2.0}, {0.0, 1.0, 0.0, 1.0});
        CHECK(upper.label[4] == 3.0);
        CHECK(lower.label[4] == 4.0);
        CHECK(max_route(b, lower, net, 4).links == std::vector<int>{1, 3});
    }
}

TEST_CASE("bush update after congestion on the cheapest corridor")
{
    const Network net = illustrative_net();
    std::vector<double> cost(net.link_count(), 1.0);
    Bush b = build_initial_bush(net, 4, cost);
    REQUIRE(b.in_bush[link(net, 4, 5)]);
    REQUIRE(b.in_bush[link(net, 5, 7)]);
    cost[link(net, 4, 5)] = 10.0;
    cost[link(net, 5, 7)] = 10.0;
    std::vector<double> flow(net.link_count(), 0.0);
    flow[link(net, 4, 6)] = 1.0;
    update_bush(b, net, flow, cost);
    CHECK(!b.in_bush[link(net, 4, 5)]);
    CHECK(!b.in_bush[link(net, 5, 7)]);
    CHECK(b.in_bush[link(net, 6, 5)]);
    CHECK(b.in_bush[link(net, 6, 7)]);
    CHECK(b.min_label[7] == 2.0);
    check_labels(b, net, cost);
}

TEST_CASE("bush at a fixed point is unchanged")
{
    const Network net = illustrative_net();
    const std::vector<double> cost(net.link_count(), 1.0);
    Bush b = build_initial_bush(net, 1, cost);
    std::vector<double> flow(net.link_count(), 0.0);
    for (int a = 0; a < net.link_count(); ++a)
        if (b.in_bush[a])
            flow[a] = 1.0;
    const auto before = b.in_bush;
    CHECK(update_bush(b, net, flow, cost) == 0);
    CHECK(b.in_bush == before);
}

TEST_CASE("a cheaper forward link enters the bush")
{
    // 1->2->4 and 1->3->4 with 2->3; initially 1-2-4 is cheapest and 3 is reached directly.
    const Network net = make_network(4, {{1, 2, 1.0}, {1, 3, 3.0}, {2, 3, 5.0}, {2, 4, 1.0}, {3, 4, 1.0}});
    std::vector<double> cost{1.0, 3.0, 5.0, 1.0, 1.0};
    Bush b = build_initial_bush(net, 1, cost);
    CHECK(!b.in_bush[2]);
    cost[2] = 0.5; // 1-2-3 now beats 1-3
    const std::vector<double> flow{1.0, 1.0, 0.0, 1.0, 0.0};
    update_bush(b, net, flow, cost);
    CHECK(b.in_bush[2]);
    const auto tree = dijkstra(net, 1, cost);
    for (int v = 1; v <= 4; ++v)
        CHECK(b.min_label[v] == doctest::Approx(tree.dist[v]));
}

TEST_CASE("repeated updates on random networks stay acyclic and reach shortest paths")
{
    const Network net = load_tntp_network(seqbush::testing::source_path("data/siouxfalls/SiouxFalls_net.tntp"));
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.5, 5.0);
    std::bernoulli_distribution keep(0.5);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> cost(net.link_count());
        for (double& c : cost)
            c = u(rng);
        const int root = 1 + rep % net.node_count;
        Bush b = build_initial_bush(net, root, cost);
        for (int round = 0; round < 30; ++round) {
            for (double& c : cost)
                c = std::max(0.1, c * u(rng) / 2.5);
            std::vector<double> flow(net.link_count(), 0.0);
            for (int a = 0; a < net.link_count(); ++a)
                if (b.in_bush[a] && keep(rng))
                    flow[a] = 1.0;
            update_bush(b, net, flow, cost);
            check_labels(b, net, cost);
            for (int v = 1; v <= net.node_count; ++v)
                CHECK(b.reaches(v));
        }
        // With flow kept on the whole bush, updates converge to the shortest path labels.
        const auto tree = dijkstra(net, root, cost);
        for (int round = 0; round < 50; ++round) {
            std::vector<double> flow(net.link_count(), 0.0);
            for (int a = 0; a < net.link_count(); ++a)
                flow[a] = b.in_bush[a] ? 1.0 : 0.0;
            if (update_bush(b, net, flow, cost) == 0)
                break;
        }
        for (int v = 1; v <= net.node_count; ++v)
            CHECK(b.min_label[v] == doctest::Approx(tree.dist[v]));
    }
}

TEST_CASE("sequence routes chain the level bushes")
{
    const auto inputs = load_inputs(seqbush::testing::illustrative_config());
    const Network& net = inputs.net;
    const CostModel model = seqbush::testing::time_plus_constant(20, 20, 10, 10, 15);
    const MatchingSequence* n1 = nullptr;
    for (const auto& s : inputs.pool)
        if (s.label() == "(1,4,7,10,13,16)")
            n1 = &s;
    REQUIRE(n1);
    // Equilibrium loading: every link at travel time 17.
    std::vector<double> empty(net.link_count()), loaded(net.link_count());
    for (int a = 0; a < net.link_count(); ++a) {
        empty[a] = class_link_cost(net.links[a], LinkClass::RDEmpty, 17.0, model);
        loaded[a] = class_link_cost(net.links[a], LinkClass::RDLoaded, 17.0, model);
    }
    std::vector<Bush> bushes;
    std::vector<const std::vector<double>*> costs;
    for (int l = 1; l <= n1->level_count(); ++l) {
        costs.push_back(n1->onboard(l) > 0 ? &loaded : &empty);
        bushes.push_back(build_initial_bush(net, n1->tasks[l - 1].node, *costs.back()));
    }
    std::vector<const Bush*> ptrs;
    for (const auto& b : bushes)
        ptrs.push_back(&b);
    const auto r = sequence_routes(*n1, net, ptrs, costs, {});
    CHECK(r.min_cost == doctest::Approx(310.0));
    CHECK(r.max_cost == doctest::Approx(r.min_cost));
    for (std::size_t l = 0; l < r.min_routes.size(); ++l)
        CHECK(r.min_routes[l].links == r.max_routes[l].links);

    SUBCASE("solo sequence")
    {
        MatchingSequence solo;
        solo.driver = {1, 16};
        solo.tasks = {{TaskKind::DriverDepart, 1, solo.driver, -1}, {TaskKind::DriverArrive, 16, solo.driver, -1}};
        refresh_sequence(solo, nullptr);
        const Bush b = build_initial_bush(net, 1, empty);
        const auto s = sequence_routes(solo, net, {&b}, {&empty}, {});
        CHECK(s.min_cost == doctest::Approx(dijkstra(net, 1, empty).dist[16]));
    }
    SUBCASE("stale labels are detected")
    {
        std::vector<double> changed = empty;
        changed[net.find_link(1, 2)] += 100.0;
        std::vector<const std::vector<double>*> bad = costs;
        bad[0] = &changed;
        CHECK_THROWS_AS(sequence_routes(*n1, net, ptrs, bad, {}), ContractError);
    }
}
