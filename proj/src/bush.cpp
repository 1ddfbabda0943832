#include "seqbush/bush.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace seqbush {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool usable_tail(const Network& net, int root, int node)
{
    return node == root || net.is_thru(node);
}

} // namespace

int Bush::link_count() const
{
    return static_cast<int>(std::count(in_bush.begin(), in_bush.end(), 1));
}

bool Bush::is_acyclic(const Network& net) const
{
    for (int a = 0; a < net.link_count(); ++a) {
        if (!in_bush[a])
            continue;
        const auto& l = net.links[a];
        if (rank[l.tail] < 0 || rank[l.head] < 0 || rank[l.tail] >= rank[l.head])
            return false;
    }
    return true;
}

Bush build_initial_bush(const Network& net, int root, const std::vector<double>& cost, const std::vector<int>& required)
{
    require(root >= 1 && root <= net.node_count, "build_initial_bush: root out of range");
    for (int a = 0; a < net.link_count(); ++a)
        require(cost[a] > 0.0, "build_initial_bush: link costs must be positive");
    for (int d : required)
        if (d != root && net.out_links[root].empty())
            throw ValidationError("root " + std::to_string(root) + " has no outgoing links; destination "
                                  + std::to_string(d) + " is unreachable");
    const auto tree = dijkstra(net, root, cost);
    for (int d : required)
        if (!std::isfinite(tree.dist.at(d)))
            throw ValidationError("destination " + std::to_string(d) + " unreachable from root "
                                  + std::to_string(root));
    Bush b;
    b.root = root;
    b.in_bush.assign(net.link_count(), 0);
    for (int v = 1; v <= net.node_count; ++v)
        if (tree.pred[v] >= 0)
            b.in_bush[tree.pred[v]] = 1;
    b.min_label = tree.dist;
    set_labels(b, net, cost);
    return b;
}

void set_labels(Bush& bush, const Network& net, const std::vector<double>& cost)
{
    const int n = net.node_count;
    std::vector<double> prev = bush.min_label;
    prev.resize(n + 1, kInf);

    // Reachable part of the bush.
    std::vector<char> seen(n + 1, 0);
    std::vector<int> stack{bush.root};
    seen[bush.root] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int a : net.out_links[u]) {
            if (!bush.in_bush[a])
                continue;
            const int v = net.links[a].head;
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        }
    }
    // Links hanging off unreachable nodes are dropped so the bush stays rooted.
    for (int a = 0; a < net.link_count(); ++a)
        if (bush.in_bush[a] && !seen[net.links[a].tail])
            bush.in_bush[a] = 0;

    std::vector<int> indeg(n + 1, 0);
    for (int a = 0; a < net.link_count(); ++a)
        if (bush.in_bush[a])
            ++indeg[net.links[a].head];
    using Key = std::tuple<double, int>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
    ready.push({0.0, bush.root});
    bush.order.clear();
    bush.rank.assign(n + 1, -1);
    while (!ready.empty()) {
        const int u = std::get<1>(ready.top());
        ready.pop();
        bush.rank[u] = static_cast<int>(bush.order.size());
        bush.order.push_back(u);
        for (int a : net.out_links[u]) {
            if (!bush.in_bush[a])
                continue;
            const int v = net.links[a].head;
            if (--indeg[v] == 0)
                ready.push({std::isfinite(prev[v]) ? prev[v] : kInf, v});
        }
    }
    for (int v = 1; v <= n; ++v)
        require(!seen[v] || bush.rank[v] >= 0, "set_labels: bush contains a cycle");

    bush.min_label.assign(n + 1, kInf);
    bush.min_pred.assign(n + 1, -1);
    bush.min_label[bush.root] = 0.0;
    for (int u : bush.order) {
        for (int a : net.in_links[u]) {
            if (!bush.in_bush[a])
                continue;
            const int t = net.links[a].tail;
            const double c = bush.min_label[t] + cost[a];
            if (c < bush.min_label[u] || (c == bush.min_label[u] && bush.min_pred[u] >= 0 && a < bush.min_pred[u])) {
                bush.min_label[u] = c;
                bush.min_pred[u] = a;
            }
        }
    }
    ++bush.label_stamp;
}

MaxLabels max_labels(const Bush& bush, const Network& net, const std::vector<double>& cost,
                     const std::vector<double>& support, double threshold)
{
    const int n = net.node_count;
    MaxLabels m;
    m.label.assign(n + 1, -kInf);
    m.pred.assign(n + 1, -1);
    m.label[bush.root] = 0.0;
    const bool has_support = !support.empty();
    for (int u : bush.order) {
        if (u == bush.root)
            continue;
        for (int a : net.in_links[u]) {
            if (!bush.in_bush[a] || !has_support || support[a] <= threshold)
                continue;
            const int t = net.links[a].tail;
            if (!std::isfinite(m.label[t]))
                continue;
            const double c = m.label[t] + cost[a];
            if (c > m.label[u] || (c == m.label[u] && a < m.pred[u])) {
                m.label[u] = c;
                m.pred[u] = a;
            }
        }
        if (m.pred[u] < 0) {
            // No supported inflow: follow the cheapest route's last link.
            const int a = bush.min_pred[u];
            if (a >= 0 && std::isfinite(m.label[net.links[a].tail])) {
                m.label[u] = m.label[net.links[a].tail] + cost[a];
                m.pred[u] = a;
            } else {
                m.label[u] = bush.min_label[u];
            }
        }
    }
    return m;
}

int update_bush(Bush& bush, const Network& net, const std::vector<double>& flow, const std::vector<double>& cost,
                double flow_threshold)
{
    const int m = net.link_count();
    for (int a = 0; a < m; ++a)
        if (bush.in_bush[a] && flow[a] <= flow_threshold)
            bush.in_bush[a] = 0;
    set_labels(bush, net, cost);

    // Reconnect nodes cut off by the removal, growing shortest routes out of the retained part.
    int added = 0;
    using Key = std::tuple<double, int>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> frontier;
    auto push_out = [&](int u) {
        if (!usable_tail(net, bush.root, u))
            return;
        for (int a : net.out_links[u]) {
            const int v = net.links[a].head;
            if (!bush.reaches(v))
                frontier.push({bush.min_label[u] + cost[a], a});
        }
    };
    for (int u : bush.order)
        push_out(u);
    while (!frontier.empty()) {
        const auto [c, a] = frontier.top();
        frontier.pop();
        const int v = net.links[a].head;
        if (bush.reaches(v))
            continue;
        bush.in_bush[a] = 1;
        ++added;
        bush.rank[v] = static_cast<int>(bush.order.size());
        bush.order.push_back(v);
        bush.min_label[v] = c;
        bush.min_pred[v] = a;
        push_out(v);
    }
    if (added > 0)
        set_labels(bush, net, cost);

    std::vector<int> p1, p2;
    bool any_improving = false;
    const double tol = 1e-12;
    for (int a = 0; a < m; ++a) {
        if (bush.in_bush[a])
            continue;
        const auto& l = net.links[a];
        if (!usable_tail(net, bush.root, l.tail) || l.head == bush.root)
            continue;
        if (!bush.reaches(l.tail) || !bush.reaches(l.head))
            continue;
        const bool forward = bush.rank[l.tail] < bush.rank[l.head];
        const bool improving
            = bush.min_label[l.tail] + cost[a] < bush.min_label[l.head] - tol * (1.0 + std::abs(bush.min_label[l.head]));
        any_improving = any_improving || improving;
        if (forward)
            p2.push_back(a);
        if (forward && improving)
            p1.push_back(a);
    }
    std::vector<int> add = p1;
    // Improving links exist but all run against the current order: fall back to every forward link.
    if (add.empty() && any_improving && !p2.empty())
        add = p2;
    std::sort(add.begin(), add.end(), [&](int x, int y) {
        return std::tie(net.links[x].tail, net.links[x].head) < std::tie(net.links[y].tail, net.links[y].head);
    });
    for (int a : add)
        bush.in_bush[a] = 1;
    set_labels(bush, net, cost);
    return added + static_cast<int>(add.size());
}

Route min_route(const Bush& bush, const Network& net, int dest)
{
    require(bush.reaches(dest), "min_route: destination not in bush");
    Route r;
    r.cost = bush.min_label[dest];
    for (int v = dest; v != bush.root;) {
        const int a = bush.min_pred[v];
        require(a >= 0, "min_route: broken predecessor chain");
        r.links.push_back(a);
        v = net.links[a].tail;
    }
    std::reverse(r.links.begin(), r.links.end());
    return r;
}

Route max_route(const Bush& bush, const MaxLabels& labels, const Network& net, int dest)
{
    require(bush.reaches(dest), "max_route: destination not in bush");
    Route r;
    r.cost = labels.label[dest];
    for (int v = dest; v != bush.root;) {
        const int a = labels.pred[v];
        require(a >= 0, "max_route: broken predecessor chain");
        r.links.push_back(a);
        v = net.links[a].tail;
    }
    std::reverse(r.links.begin(), r.links.end());
    return r;
}

SequenceRoutes sequence_routes(const MatchingSequence& seq, const Network& net,
                               const std::vector<const Bush*>& level_bush,
                               const std::vector<const std::vector<double>*>& level_cost,
                               const std::vector<const std::vector<double>*>& level_support)
{
    const int L = seq.level_count();
    require(static_cast<int>(level_bush.size()) == L && static_cast<int>(level_cost.size()) == L,
            "sequence_routes: one bush and cost layer per level required");
    SequenceRoutes out;
    static const std::vector<double> empty;
    for (int l = 1; l <= L; ++l) {
        const int o = seq.tasks[l - 1].node;
        const int d = seq.tasks[l].node;
        if (o == d) {
            out.min_routes.push_back({});
            out.max_routes.push_back({});
            continue;
        }
        const Bush* b = level_bush[l - 1];
        const auto& cost = *level_cost[l - 1];
        require(b != nullptr && b->root == o, "sequence_routes: level bush root mismatch");
        Route lo = min_route(*b, net, d);
        double check = 0.0;
        for (int a : lo.links)
            check += cost[a];
        if (std::abs(check - lo.cost) > 1e-8 * (1.0 + std::abs(check)))
            throw ContractError("sequence_routes: stale bush labels for level " + std::to_string(l));
        const auto& sup = level_support.size() > static_cast<std::size_t>(l - 1) && level_support[l - 1]
            ? *level_support[l - 1]
            : empty;
        const MaxLabels ml = max_labels(*b, net, cost, sup);
        Route hi = max_route(*b, ml, net, d);
        out.min_cost += lo.cost;
        out.max_cost += hi.cost;
        out.min_routes.push_back(std::move(lo));
        out.max_routes.push_back(std::move(hi));
    }
    return out;
}

} // namespace seqbush
