#pragma once

// Rooted acyclic subnetworks with min/max cost labels.

#include "seqbush/matchgen.hpp"
#include "seqbush/netio.hpp"

#include <vector>

namespace seqbush {

struct Route {
    std::vector<int> links; // link indices in travel order
    double cost = 0.0;
};

struct Bush {
    int root = 0;
    std::vector<char> in_bush;     // per link
    std::vector<int> order;        // reachable nodes in topological order
    std::vector<int> rank;         // per node id, -1 when unreachable
    std::vector<double> min_label; // per node id, +inf when unreachable
    std::vector<int> min_pred;     // incoming link on the cheapest route, -1 at root
    int label_stamp = 0;           // bumped whenever labels are recomputed

    int link_count() const;
    bool reaches(int node) const { return node >= 1 && node < static_cast<int>(rank.size()) && rank[node] >= 0; }
    /// Checks that every retained link goes forward in `order`.
    bool is_acyclic(const Network& net) const;
};

/// Max labels restricted to one flow support (a per-sequence level flow or a bush total).
struct MaxLabels {
    std::vector<double> label;
    std::vector<int> pred;
};

/// Shortest-path tree from `root` as the initial bush. Throws ValidationError naming the first
/// destination in `required` that cannot be reached.
Bush build_initial_bush(const Network& net, int root, const std::vector<double>& cost,
                        const std::vector<int>& required = {});

/// Recomputes topological order (ties by previous min label, then node id) and min labels.
void set_labels(Bush& bush, const Network& net, const std::vector<double>& cost);

/// Costliest route labels over links where `support` is positive. Nodes without a supported
/// incoming link fall back to the cheapest route so that the labels are always defined.
MaxLabels max_labels(const Bush& bush, const Network& net, const std::vector<double>& cost,
                     const std::vector<double>& support, double threshold = 0.0);

/// Removes unused links (keeping the cheapest-route tree), then adds improving links that respect
/// the topological order. Labels are recomputed before returning. Returns the number of links added.
int update_bush(Bush& bush, const Network& net, const std::vector<double>& flow, const std::vector<double>& cost,
                double flow_threshold = 1e-9);

Route min_route(const Bush& bush, const Network& net, int dest);
Route max_route(const Bush& bush, const MaxLabels& labels, const Network& net, int dest);

/// Cheapest and costliest chained routes for a sequence. `level_bush[l-1]` is the bush for level l
/// (ignored for virtual levels), `level_cost[l-1]` its link cost layer and `level_support[l-1]` the
/// sequence's own flow on that level (may be empty).
struct SequenceRoutes {
    std::vector<Route> min_routes;
    std::vector<Route> max_routes;
    double min_cost = 0.0;
    double max_cost = 0.0;
};

SequenceRoutes sequence_routes(const MatchingSequence& seq, const Network& net,
                               const std::vector<const Bush*>& level_bush,
                               const std::vector<const std::vector<double>*>& level_cost,
                               const std::vector<const std::vector<double>*>& level_support);

} // namespace seqbush
