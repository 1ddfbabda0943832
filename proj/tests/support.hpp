#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "seqbush/scenario.hpp"

#include <initializer_list>
#include <string>
#include <tuple>

#ifndef SEQBUSH_SOURCE_DIR
#error "SEQBUSH_SOURCE_DIR must point at the repository root"
#endif

namespace seqbush::testing {

inline std::string source_path(const std::string& rel)
{
    return std::string(SEQBUSH_SOURCE_DIR) + "/" + rel;
}

inline ScenarioConfig illustrative_config()
{
    auto cfg = load_config(source_path("configs/illustrative.ini"));
    cfg.output_dir.clear();
    return cfg;
}

inline ScenarioConfig siouxfalls_config()
{
    auto cfg = load_config(source_path("configs/siouxfalls.ini"));
    cfg.output_dir.clear();
    return cfg;
}

/// Network from (tail, head, free-flow time) triples; length equals the free-flow time.
inline Network make_network(int nodes, std::initializer_list<std::tuple<int, int, double>> links,
                            double capacity = 10000.0)
{
    Network net;
    net.node_count = nodes;
    net.zone_count = nodes;
    for (const auto& [t, h, fft] : links) {
        Link l;
        l.tail = t;
        l.head = h;
        l.free_flow_time = fft;
        l.length = fft;
        l.capacity = capacity;
        net.links.push_back(l);
    }
    net.finalize();
    return net;
}

/// Cost model where every class pays travel time plus a per-link constant.
inline CostModel time_plus_constant(double da, double rd_empty, double rd_loaded, double rp, double pt)
{
    CostModel m;
    for (auto& p : m.mode)
        p = ModeCostParams{1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    m.params(Mode::DA).fixed = da;
    m.params(Mode::RD).fixed = rd_empty;
    m.params(Mode::RD).fixed_loaded = rd_loaded;
    m.params(Mode::RP).fixed = rp;
    m.params(Mode::PT).fixed = pt;
    m.pt_time = PtTimeSource::Road;
    return m;
}

} // namespace seqbush::testing
