#pragma once

// Random desk-scale ridesharing instances: a small grid, one driver OD, a few rider ODs and at most
// three matching sequences, with fixed modal demand.

#include "support.hpp"

#include <memory>
#include <random>

namespace seqbush::testing {

struct DeskInstance {
    std::unique_ptr<Network> net;
    CostModel model;
    std::vector<MatchingSequence> pool;
    ModalDemandTable modal;
    DemandTable demand;
    int capacity = 2;

    Problem problem() const
    {
        Problem p;
        p.net = net.get();
        p.model = model;
        p.pool = pool;
        p.demand = demand;
        p.modal_demand = modal;
        p.capacity = capacity;
        return p;
    }
};

/// Rows x cols grid with bidirectional links. Node ids run row-major from 1.
inline Network grid_network(int rows, int cols, std::mt19937& rng)
{
    std::uniform_real_distribution<double> fft(1.0, 4.0);
    std::uniform_real_distribution<double> cap(300.0, 1200.0);
    Network net;
    net.node_count = rows * cols;
    net.zone_count = net.node_count;
    auto id = [&](int r, int c) { return r * cols + c + 1; };
    auto add = [&](int a, int b) {
        Link l;
        l.free_flow_time = fft(rng);
        l.length = l.free_flow_time;
        l.capacity = cap(rng);
        l.tail = a;
        l.head = b;
        net.links.push_back(l);
        Link back = l;
        back.tail = b;
        back.head = a;
        net.links.push_back(back);
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols)
                add(id(r, c), id(r, c + 1));
            if (r + 1 < rows)
                add(id(r, c), id(r + 1, c));
        }
    net.finalize();
    return net;
}

/// Draws instances until one has a non-empty pool of positive-saving sequences.
inline DeskInstance random_desk_instance(std::mt19937& rng)
{
    std::uniform_int_distribution<int> dim(3, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        DeskInstance d;
        const int rows = dim(rng), cols = dim(rng);
        d.net = std::make_unique<Network>(grid_network(rows, cols, rng));
        const int n = d.net->node_count;
        const OD driver{1, n};
        std::uniform_int_distribution<int> node(2, n - 1);
        std::vector<OD> riders;
        for (int i = 0; i < 2; ++i) {
            OD w{node(rng), node(rng)};
            if (w.o == w.d || w.o > w.d)
                continue;
            if (std::find(riders.begin(), riders.end(), w) == riders.end())
                riders.push_back(w);
        }
        if (riders.empty())
            continue;
        const SkimMatrix sk = free_flow_skims(*d.net);
        PoolOptions opt;
        opt.generation.capacity = 2;
        opt.generation.max_passengers = 2;
        opt.generation.detour_factor = 1.6;
        opt.require_positive_saving = true;
        opt.max_sequences_per_driver = 3;
        d.pool = build_sequence_pool({driver}, riders, opt, sk);
        if (d.pool.empty())
            continue;

        // Sharing a ride is cheaper per link, so some matching is worthwhile.
        const double base = 2.0 + 3.0 * u(rng);
        d.model = time_plus_constant(base, base, 0.3 * base * u(rng), 0.2 * base, (0.6 + 0.5 * u(rng)) * base);
        d.model.pt_time = PtTimeSource::FreeFlow;

        auto set = [&](const OD& od, Mode m, double q) {
            d.modal.entries[od][static_cast<int>(m)] += q;
            d.demand.entries[od] += q;
        };
        set(driver, Mode::RD, 200.0 + 800.0 * u(rng));
        set(driver, Mode::DA, 300.0 * u(rng));
        for (const OD& r : riders)
            set(r, Mode::RP, 100.0 + 500.0 * u(rng));
        // Background car traffic competing for the same links.
        set(OD{cols, n - cols + 1}, Mode::DA, 200.0 + 600.0 * u(rng));
        return d;
    }
}

} // namespace seqbush::testing
