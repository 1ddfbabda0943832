#include "seqbush/assign.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

namespace seqbush {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kLayerDA = -1;
constexpr int kLayerPT = -2;

double pos(double v) { return v > 0.0 ? v : 0.0; }

} // namespace

ModalValues mode_split_step(const ModalValues& q, const ModalValues& cost, double theta)
{
    require(theta >= 0.0, "mode_split_step: negative step");
    int best = 0;
    for (int m = 1; m < kModeCount; ++m)
        if (cost[m] < cost[best])
            best = m;
    ModalValues out = q;
    for (int m = 0; m < kModeCount; ++m) {
        if (m == best || !std::isfinite(cost[m]))
            continue;
        const double shift = std::min(q[m], theta * (cost[m] - cost[best]));
        if (shift <= 0.0)
            continue;
        out[m] -= shift;
        out[best] += shift;
    }
    for (int m = 0; m < kModeCount; ++m) {
        if (!std::isfinite(cost[m]) && m != best && q[m] > 0.0) {
            // Unavailable modes give all their demand away.
            out[best] += out[m];
            out[m] = 0.0;
        }
    }
    return out;
}

std::vector<double> project_matching(const std::vector<MatchingSequence>& pool, const std::vector<double>& Z,
                                     const std::map<OD, double>& q_rd, const std::map<OD, double>& q_rp,
                                     int max_sweeps, double tol)
{
    require(Z.size() == pool.size(), "project_matching: size mismatch");
    // Halfspaces a.z <= b, each with sparse coefficients.
    struct Half {
        std::vector<std::pair<int, double>> a;
        double b = 0.0;
        double norm2 = 0.0;
    };
    std::map<OD, Half> drv, rid;
    for (const auto& s : pool) {
        drv[s.driver].a.push_back({s.id, 1.0});
        for (const auto& [od, c] : s.passenger_groups())
            rid[od].a.push_back({s.id, static_cast<double>(c)});
    }
    std::vector<Half> halves;
    auto lookup = [](const std::map<OD, double>& m, const OD& od) {
        auto it = m.find(od);
        return it == m.end() ? 0.0 : std::max(0.0, it->second);
    };
    for (auto& [od, h] : drv) {
        h.b = lookup(q_rd, od);
        halves.push_back(h);
    }
    for (auto& [od, h] : rid) {
        h.b = lookup(q_rp, od);
        halves.push_back(h);
    }
    for (auto& h : halves)
        for (auto& [i, c] : h.a)
            h.norm2 += c * c;

    // Dykstra's alternating projections over the halfspaces and the nonnegative orthant.
    const std::size_t n = Z.size();
    std::vector<double> x = Z;
    std::vector<std::vector<double>> inc(halves.size());
    for (std::size_t k = 0; k < halves.size(); ++k)
        inc[k].assign(halves[k].a.size(), 0.0);
    std::vector<double> inc_orth(n, 0.0);
    double scale = 1.0;
    for (double v : Z)
        scale = std::max(scale, std::abs(v));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t k = 0; k < halves.size(); ++k) {
            const Half& h = halves[k];
            double dot = 0.0;
            for (std::size_t j = 0; j < h.a.size(); ++j) {
                const int i = h.a[j].first;
                const double yi = x[i] + inc[k][j];
                dot += h.a[j].second * yi;
            }
            const double viol = std::max(0.0, dot - h.b) / h.norm2;
            for (std::size_t j = 0; j < h.a.size(); ++j) {
                const int i = h.a[j].first;
                const double yi = x[i] + inc[k][j];
                const double xi = yi - viol * h.a[j].second;
                inc[k][j] = yi - xi;
                change = std::max(change, std::abs(xi - x[i]));
                x[i] = xi;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double yi = x[i] + inc_orth[i];
            const double xi = std::max(0.0, yi);
            inc_orth[i] = yi - xi;
            change = std::max(change, std::abs(xi - x[i]));
            x[i] = xi;
        }
        if (change <= tol * scale)
            break;
    }
    // Remove residual round-off so the result is feasible.
    for (auto& v : x)
        v = std::max(0.0, v);
    for (const auto& h : halves) {
        double dot = 0.0;
        for (auto& [i, c] : h.a)
            dot += c * x[i];
        if (dot > h.b && dot > 0.0) {
            const double f = h.b / dot;
            for (auto& [i, c] : h.a)
                x[i] *= f;
        }
    }
    return x;
}

std::vector<double> greedy_matching(const std::vector<MatchingSequence>& pool, const std::map<OD, double>& q_rd,
                                    const std::map<OD, double>& q_rp)
{
    std::vector<double> Z(pool.size(), 0.0);
    std::map<OD, double> rd = q_rd, rp = q_rp;
    std::vector<int> order;
    for (const auto& s : pool)
        if (s.R > 0.0)
            order.push_back(s.id);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& sa = pool[a];
        const auto& sb = pool[b];
        if (sa.R != sb.R)
            return sa.R > sb.R;
        const auto ga = sa.passenger_groups().size();
        const auto gb = sb.passenger_groups().size();
        if (ga != gb)
            return ga > gb;
        return a < b;
    });
    for (int n : order) {
        const auto& s = pool[n];
        double z = std::max(0.0, rd[s.driver]);
        for (const auto& [od, c] : s.passenger_groups())
            z = std::min(z, std::max(0.0, rp[od]) / c);
        if (z <= 0.0)
            continue;
        Z[n] = z;
        rd[s.driver] -= z;
        for (const auto& [od, c] : s.passenger_groups())
            rp[od] -= c * z;
    }
    return Z;
}

double al_value(const std::vector<double>& mu, double rho, const std::vector<double>& h)
{
    require(mu.size() == h.size(), "al_value: size mismatch");
    double a = 0.0;
    if (rho <= 0.0) {
        for (std::size_t i = 0; i < h.size(); ++i)
            a += mu[i] * h[i];
        return a;
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double t = pos(mu[i] + rho * h[i]);
        a += t * t - mu[i] * mu[i];
    }
    return a / (2.0 * rho);
}

void update_al(ALParams& al, const std::vector<double>& h)
{
    require(al.mu.size() == h.size(), "update_al: size mismatch");
    for (std::size_t i = 0; i < h.size(); ++i)
        al.mu[i] = pos(al.mu[i] + al.rho * h[i]);
    double norm = 0.0;
    for (double v : h)
        norm += pos(v) * pos(v);
    norm = std::sqrt(norm);
    if (al.prev_violation_norm >= 0.0 && norm > 0.0 && norm >= al.sigma2 * al.prev_violation_norm)
        al.rho *= al.sigma1;
    al.prev_violation_norm = norm;
}

double route_gap(const std::vector<double>& flows, const std::vector<double>& costs)
{
    require(flows.size() == costs.size() && !flows.empty(), "route_gap: size mismatch");
    double total = 0.0, demand = 0.0;
    double best = kInf;
    for (std::size_t k = 0; k < flows.size(); ++k) {
        total += flows[k] * costs[k];
        demand += flows[k];
        best = std::min(best, costs[k]);
    }
    return total - demand * best;
}

// ---------------------------------------------------------------------------------------------

struct EquilibriumSolver::Impl {
    struct BushRec {
        Bush b;
        int layer = 0;
        std::vector<double> flow;   // total flow on the bush
        std::map<int, double> demand; // DA / PT bushes: demand by destination
    };

    struct OptionCost {
        double target = kInf; // cost of adding one unit
        double source = kInf; // cost of removing one unit
        double flow = 0.0;
    };

    Problem problem;
    const Network& net;
    SolverConfig cfg;
    std::vector<MatchingSequence>& pool;
    int max_onboard = 0;

    std::vector<OD> ods;
    std::map<OD, int> od_index;
    std::vector<ODFlows> odf;
    std::vector<std::vector<int>> driver_seqs;
    std::vector<std::vector<int>> rider_seqs;
    std::vector<int> seq_driver;
    std::vector<std::vector<std::pair<int, int>>> seq_riders; // (od index, count)

    std::vector<double> F, Z;
    ALParams al;
    std::vector<std::vector<std::vector<double>>> level_flow;
    std::vector<std::vector<int>> level_bush;

    std::vector<BushRec> bushes;
    std::map<std::pair<int, int>, int> bush_index;
    std::vector<int> da_bush, pt_bush; // by node id

    std::vector<double> x;
    LinkCosts costs;
    double total_q = 0.0;
    double mean_q = 0.0;
    double max_R = 0.0;

    double gamma_M = 1.0, gamma_Z = 1.0;
    double prev_mode_change = -1.0, prev_match_change = -1.0;
    int inner_iter = 0, outer_iter = 0;
    std::vector<GapReport> history;
    std::function<void(const InnerSnapshot&)> observer;
    bool initialized = false;

    Impl(const Problem& p, SolverConfig c)
        : problem(p), net(*problem.net), cfg(c), pool(problem.pool)
    {
        require(problem.net != nullptr, "EquilibriumSolver: network missing");
    }

    double eps_flow() const { return cfg.flow_eps * std::max(1.0, total_q); }

    const std::vector<double>& layer_cost(int layer) const
    {
        if (layer == kLayerDA)
            return costs.da;
        if (layer == kLayerPT)
            return costs.pt;
        return costs.layer[layer];
    }

    double layer_time_coeff(int layer) const
    {
        if (layer == kLayerDA)
            return costs.da_a;
        if (layer == kLayerPT)
            return costs.pt_a;
        return costs.layer_a[layer];
    }

    bool is_vehicle_layer(int layer) const { return layer != kLayerPT; }

    // ---- flow primitives -------------------------------------------------------------------

    void add_link(BushRec& br, std::vector<double>* member, int a, double delta)
    {
        if (delta == 0.0)
            return;
        br.flow[a] += delta;
        if (br.flow[a] < 0.0)
            br.flow[a] = std::max(br.flow[a], 0.0);
        if (member) {
            (*member)[a] += delta;
            if ((*member)[a] < 0.0)
                (*member)[a] = 0.0;
        }
        if (is_vehicle_layer(br.layer)) {
            x[a] = std::max(0.0, x[a] + delta);
            if (cfg.immediate_cost_refresh)
                costs.update_link(net, problem.model, a, x[a]);
        }
    }

    void add_route(BushRec& br, std::vector<double>* member, const std::vector<int>& links, double delta)
    {
        for (int a : links)
            add_link(br, member, a, delta);
    }

    // Flow shares of removing one unit terminating at `dest`, splitting backwards over incoming flow.
    std::vector<std::pair<int, double>> removal_shares(const BushRec& br, const std::vector<double>& flow, int dest) const
    {
        std::vector<std::pair<int, double>> shares;
        if (!br.b.reaches(dest) || dest == br.b.root)
            return shares;
        std::vector<double> need(net.node_count + 1, 0.0);
        need[dest] = 1.0;
        for (auto it = br.b.order.rbegin(); it != br.b.order.rend(); ++it) {
            const int u = *it;
            if (need[u] <= 0.0 || u == br.b.root)
                continue;
            double inflow = 0.0;
            for (int a : net.in_links[u])
                if (br.b.in_bush[a])
                    inflow += flow[a];
            if (inflow <= 0.0) {
                // No flow reaches u: fall back to the cheapest route.
                const int a = br.b.min_pred[u];
                if (a < 0)
                    continue;
                shares.push_back({a, need[u]});
                need[net.links[a].tail] += need[u];
                continue;
            }
            for (int a : net.in_links[u]) {
                if (!br.b.in_bush[a] || flow[a] <= 0.0)
                    continue;
                const double s = need[u] * flow[a] / inflow;
                shares.push_back({a, s});
                need[net.links[a].tail] += s;
            }
        }
        return shares;
    }

    double shares_cost(const std::vector<std::pair<int, double>>& shares, int layer) const
    {
        const auto& c = layer_cost(layer);
        double s = 0.0;
        for (auto& [a, w] : shares)
            s += w * c[a];
        return s;
    }

    void remove_demand(BushRec& br, int dest, double delta)
    {
        if (delta <= 0.0)
            return;
        const auto shares = removal_shares(br, br.flow, dest);
        for (auto& [a, w] : shares)
            add_link(br, nullptr, a, -delta * w);
        br.demand[dest] -= delta;
        if (br.demand[dest] < 0.0)
            br.demand[dest] = 0.0;
    }

    void add_demand(BushRec& br, int dest, double delta)
    {
        if (delta <= 0.0)
            return;
        set_labels(br.b, net, layer_cost(br.layer));
        const Route r = min_route(br.b, net, dest);
        add_route(br, nullptr, r.links, delta);
        br.demand[dest] += delta;
    }

    BushRec& da_for(int origin) { return bushes[da_bush[origin]]; }
    BushRec& pt_for(int origin) { return bushes[pt_bush[origin]]; }

    void scale_sequence(int n, double new_flow)
    {
        const double old = F[n];
        const double f = old > 0.0 ? new_flow / old : 0.0;
        for (int l = 0; l < static_cast<int>(level_flow[n].size()); ++l) {
            auto& lf = level_flow[n][l];
            if (lf.empty())
                continue;
            BushRec& br = bushes[level_bush[n][l]];
            for (int a = 0; a < net.link_count(); ++a) {
                if (lf[a] == 0.0)
                    continue;
                const double d = lf[a] * (f - 1.0);
                add_link(br, &lf, a, d);
            }
        }
        F[n] = new_flow;
    }

    void add_sequence_flow(int n, double delta)
    {
        if (delta <= 0.0)
            return;
        const auto& seq = pool[n];
        for (int l = 1; l <= seq.level_count(); ++l) {
            const int bi = level_bush[n][l - 1];
            if (bi < 0)
                continue;
            BushRec& br = bushes[bi];
            set_labels(br.b, net, layer_cost(br.layer));
            auto& lf = level_flow[n][l - 1];
            if (lf.empty())
                lf.assign(net.link_count(), 0.0);
            const Route r = min_route(br.b, net, seq.tasks[l].node);
            add_route(br, &lf, r.links, delta);
        }
        F[n] += delta;
    }

    // Riders released from sequence n travel by PT; riders joining n are taken from PT.
    void release_riders(int n, double delta)
    {
        for (auto& [pi, c] : seq_riders[n]) {
            odf[pi].quit_rp += c * delta;
            add_demand(pt_for(ods[pi].o), ods[pi].d, c * delta);
        }
    }

    void reduce_sequence(int n, double delta, bool release_driver, int keep_rider_od)
    {
        delta = std::min(delta, F[n]);
        if (delta <= 0.0)
            return;
        scale_sequence(n, F[n] - delta);
        if (release_driver) {
            const int di = seq_driver[n];
            odf[di].quit_rd += delta;
            add_demand(da_for(ods[di].o), ods[di].d, delta);
        }
        for (auto& [pi, c] : seq_riders[n]) {
            if (pi == keep_rider_od)
                continue;
            odf[pi].quit_rp += c * delta;
            add_demand(pt_for(ods[pi].o), ods[pi].d, c * delta);
        }
    }

    // ---- setup -----------------------------------------------------------------------------

    int ensure_bush(int root, int layer, const std::vector<int>& required)
    {
        const auto key = std::make_pair(root, layer);
        if (auto it = bush_index.find(key); it != bush_index.end())
            return it->second;
        BushRec br;
        br.layer = layer;
        br.b = build_initial_bush(net, root, layer_cost(layer), required);
        br.flow.assign(net.link_count(), 0.0);
        bushes.push_back(std::move(br));
        const int idx = static_cast<int>(bushes.size()) - 1;
        bush_index[key] = idx;
        return idx;
    }

    void initialize()
    {
        const int m = net.link_count();
        ods.clear();
        od_index.clear();
        odf.clear();
        if (cfg.mode_choice) {
            for (const auto& [od, q] : problem.demand.entries) {
                od_index[od] = static_cast<int>(ods.size());
                ods.push_back(od);
                ODFlows f;
                f.demand = q;
                for (int k = 0; k < kModeCount; ++k)
                    f.q[k] = cfg.even_initial_split ? q / kModeCount : (k == 0 ? q : 0.0);
                odf.push_back(f);
            }
        } else {
            for (const auto& [od, qv] : problem.modal_demand.entries) {
                od_index[od] = static_cast<int>(ods.size());
                ods.push_back(od);
                ODFlows f;
                f.q = qv;
                f.demand = std::accumulate(qv.begin(), qv.end(), 0.0);
                odf.push_back(f);
            }
        }
        // ODs that only appear in the pool still need bookkeeping.
        for (const auto& s : pool) {
            std::vector<OD> all{s.driver};
            for (const auto& pv : s.passengers)
                all.push_back(pv.od);
            for (const OD& od : all) {
                if (!od_index.count(od)) {
                    od_index[od] = static_cast<int>(ods.size());
                    ods.push_back(od);
                    odf.push_back(ODFlows{});
                }
            }
        }
        total_q = 0.0;
        for (const auto& f : odf)
            total_q += f.demand;
        mean_q = ods.empty() ? 0.0 : total_q / static_cast<double>(ods.size());

        max_onboard = 0;
        for (const auto& s : pool) {
            require(s.id >= 0 && s.id < static_cast<int>(pool.size()) && &pool[s.id] == &s,
                    "EquilibriumSolver: sequence ids must equal their pool index");
            for (int o : s.occupancy)
                max_onboard = std::max(max_onboard, o);
        }
        max_onboard = std::max(max_onboard, problem.capacity);

        problem.model.validate();
        x.assign(m, 0.0);
        costs.evaluate(net, problem.model, x, max_onboard);
        for (int a = 0; a < m; ++a) {
            if (!(costs.da[a] > 0.0) || !(costs.pt[a] > 0.0))
                throw ValidationError("link costs must be positive for every class");
            for (int k = 0; k <= max_onboard; ++k)
                if (!(costs.layer[k][a] > 0.0))
                    throw ValidationError("ridesharing layer costs must be positive");
        }

        driver_seqs.assign(ods.size(), {});
        rider_seqs.assign(ods.size(), {});
        seq_driver.assign(pool.size(), -1);
        seq_riders.assign(pool.size(), {});
        max_R = 0.0;
        for (const auto& s : pool) {
            const int di = od_index.at(s.driver);
            seq_driver[s.id] = di;
            driver_seqs[di].push_back(s.id);
            for (const auto& [od, c] : s.passenger_groups()) {
                const int pi = od_index.at(od);
                seq_riders[s.id].push_back({pi, c});
                rider_seqs[pi].push_back(s.id);
            }
            max_R = std::max(max_R, std::abs(s.R));
        }

        bushes.clear();
        bush_index.clear();
        da_bush.assign(net.node_count + 1, -1);
        pt_bush.assign(net.node_count + 1, -1);
        std::map<int, std::vector<int>> dests;
        for (const OD& od : ods)
            dests[od.o].push_back(od.d);
        for (auto& [o, ds] : dests) {
            da_bush[o] = ensure_bush(o, kLayerDA, ds);
            pt_bush[o] = ensure_bush(o, kLayerPT, ds);
        }
        level_bush.assign(pool.size(), {});
        level_flow.assign(pool.size(), {});
        for (const auto& s : pool) {
            level_flow[s.id].assign(s.level_count(), {});
            for (int l = 1; l <= s.level_count(); ++l) {
                const int o = s.tasks[l - 1].node;
                const int d = s.tasks[l].node;
                level_bush[s.id].push_back(o == d ? -1 : ensure_bush(o, s.onboard(l), {d}));
            }
        }

        F.assign(pool.size(), 0.0);
        for (std::size_t i = 0; i < ods.size(); ++i) {
            odf[i].quit_rd = odf[i].q[static_cast<int>(Mode::RD)];
            odf[i].quit_rp = odf[i].q[static_cast<int>(Mode::RP)];
        }
        for (std::size_t i = 0; i < ods.size(); ++i) {
            const OD& od = ods[i];
            add_demand(da_for(od.o), od.d, odf[i].q[0] + odf[i].quit_rd);
            add_demand(pt_for(od.o), od.d, odf[i].q[3] + odf[i].quit_rp);
        }
        costs.evaluate(net, problem.model, x, max_onboard);

        Z = greedy_matching(pool, modal_map(Mode::RD), modal_map(Mode::RP));
        al = ALParams{};
        al.mu.assign(pool.size(), 0.0);
        al.sigma1 = cfg.sigma1;
        al.sigma2 = cfg.sigma2;
        gamma_M = gamma_Z = cfg.gamma0;
        prev_mode_change = prev_match_change = -1.0;
        inner_iter = outer_iter = 0;
        history.clear();
        initialized = true;
    }

    std::map<OD, double> modal_map(Mode m) const
    {
        std::map<OD, double> out;
        for (std::size_t i = 0; i < ods.size(); ++i)
            out[ods[i]] = odf[i].q[static_cast<int>(m)];
        return out;
    }

    void refresh_all_costs() { costs.evaluate(net, problem.model, x, max_onboard); }

    void relabel(int bi) { set_labels(bushes[bi].b, net, layer_cost(bushes[bi].layer)); }

    void relabel_all()
    {
        for (int i = 0; i < static_cast<int>(bushes.size()); ++i)
            relabel(i);
    }

    // ---- option costs ----------------------------------------------------------------------

    double al_term(int n) const { return pos(al.mu[n] + al.rho * (F[n] - Z[n])); }

    double da_min(int od) const
    {
        const auto& br = bushes[da_bush[ods[od].o]];
        return br.b.min_label[ods[od].d];
    }
    double pt_min(int od) const
    {
        const auto& br = bushes[pt_bush[ods[od].o]];
        return br.b.min_label[ods[od].d];
    }
    double da_avg(int od) const
    {
        const auto& br = bushes[da_bush[ods[od].o]];
        return shares_cost(removal_shares(br, br.flow, ods[od].d), kLayerDA);
    }
    double pt_avg(int od) const
    {
        const auto& br = bushes[pt_bush[ods[od].o]];
        return shares_cost(removal_shares(br, br.flow, ods[od].d), kLayerPT);
    }

    // Bundle cost of sequence n along cheapest level routes (labels must be fresh).
    double seq_min_cost(int n) const
    {
        const auto& s = pool[n];
        double c = 0.0;
        for (int l = 1; l <= s.level_count(); ++l) {
            const int bi = level_bush[n][l - 1];
            if (bi >= 0)
                c += bushes[bi].b.min_label[s.tasks[l].node];
        }
        return c;
    }

    double seq_avg_cost(int n) const
    {
        if (F[n] <= 0.0)
            return seq_min_cost(n);
        const auto& s = pool[n];
        double c = 0.0;
        for (int l = 1; l <= s.level_count(); ++l) {
            const int bi = level_bush[n][l - 1];
            const auto& lf = level_flow[n][l - 1];
            if (bi < 0 || lf.empty())
                continue;
            const auto& lc = layer_cost(bushes[bi].layer);
            double t = 0.0;
            for (int a = 0; a < net.link_count(); ++a)
                t += lf[a] * lc[a];
            c += t / F[n];
        }
        return c;
    }

    // Relative option cost for the driver group: bundle cost less the riders' PT alternative.
    OptionCost option_cost(int n, const std::vector<double>* sp_target) const
    {
        OptionCost oc;
        double pt_in = 0.0, pt_out = 0.0;
        for (auto& [pi, c] : seq_riders[n]) {
            pt_in += c * pt_min(pi);
            pt_out += c * (odf[pi].quit_rp > 0.0 ? pt_avg(pi) : pt_min(pi));
        }
        const double tgt = sp_target ? (*sp_target)[n] : seq_min_cost(n);
        oc.target = tgt - pt_out + al_term(n);
        oc.flow = F[n];
        if (F[n] > 0.0)
            oc.source = seq_avg_cost(n) - pt_in + al_term(n);
        return oc;
    }

    OptionCost quit_cost(int di, double sp_da) const
    {
        OptionCost oc;
        oc.target = sp_da;
        oc.flow = odf[di].quit_rd;
        if (oc.flow > 0.0)
            oc.source = da_avg(di);
        return oc;
    }

    // Largest feasible move from option s to option t (-1 is quit) for driver OD di.
    double move_capacity(int di, int s, int t) const
    {
        double cap = s < 0 ? odf[di].quit_rd : F[s];
        if (t >= 0) {
            for (auto& [pi, c] : seq_riders[t]) {
                int cs = 0;
                if (s >= 0)
                    for (auto& [pj, cj] : seq_riders[s])
                        if (pj == pi)
                            cs = cj;
                const int need = c - cs;
                if (need > 0)
                    cap = std::min(cap, odf[pi].quit_rp / need);
            }
        }
        return std::max(0.0, cap);
    }

    // ---- passes ----------------------------------------------------------------------------

    // One Newton-type shift from the costliest used route to the cheapest route in a bush.
    double shift_in_bush(BushRec& br, std::vector<double>* member, int dest)
    {
        const auto& cost = layer_cost(br.layer);
        set_labels(br.b, net, cost);
        const auto& support = member ? *member : br.flow;
        const MaxLabels ml = max_labels(br.b, net, cost, support);
        const double lo = br.b.min_label[dest];
        const double hi = ml.label[dest];
        if (!(hi - lo > 1e-12 * (1.0 + std::abs(lo))))
            return 0.0;
        const Route rmin = min_route(br.b, net, dest);
        const Route rmax = max_route(br.b, ml, net, dest);
        std::vector<int> on_min(net.link_count(), 0), on_max(net.link_count(), 0);
        for (int a : rmin.links)
            on_min[a] = 1;
        for (int a : rmax.links)
            on_max[a] = 1;
        double bottleneck = kInf;
        double H = 0.0;
        const double coef = layer_time_coeff(br.layer);
        for (int a : rmax.links) {
            if (on_min[a])
                continue;
            bottleneck = std::min(bottleneck, support[a]);
            H += coef * costs.dtime[a];
        }
        for (int a : rmin.links)
            if (!on_max[a])
                H += coef * costs.dtime[a];
        if (!std::isfinite(bottleneck) || bottleneck <= 0.0)
            return 0.0;
        const double gain = hi - lo;
        const double delta = H > 1e-15 ? std::min(bottleneck, gain / H) : bottleneck;
        for (int a : rmax.links)
            if (!on_min[a])
                add_link(br, member, a, -delta);
        for (int a : rmin.links)
            if (!on_max[a])
                add_link(br, member, a, delta);
        return delta;
    }

    void route_pass()
    {
        if (!cfg.immediate_cost_refresh)
            refresh_all_costs();
        for (int o = 1; o <= net.node_count; ++o) {
            for (int bi : {da_bush[o], pt_bush[o]}) {
                if (bi < 0)
                    continue;
                BushRec& br = bushes[bi];
                std::vector<int> dests;
                for (auto& [d, q] : br.demand)
                    if (q > 0.0)
                        dests.push_back(d);
                for (int d : dests)
                    shift_in_bush(br, nullptr, d);
            }
        }
    }

    void bush_update_pass()
    {
        if (!cfg.immediate_cost_refresh)
            refresh_all_costs();
        const double thr = eps_flow() * 1e-3;
        for (auto& br : bushes)
            update_bush(br.b, net, br.flow, layer_cost(br.layer), thr);
    }

    void group_pass()
    {
        if (!cfg.immediate_cost_refresh)
            refresh_all_costs();
        for (int di = 0; di < static_cast<int>(ods.size()); ++di)
            push_group(di);
    }

    void push_group(int di)
    {
        const auto& seqs = driver_seqs[di];
        if (seqs.empty())
            return;
        const double eps = eps_flow();
        // Route shifts inside each used sequence, level by level.
        for (int n : seqs) {
            if (F[n] <= eps)
                continue;
            const auto& s = pool[n];
            for (int l = 1; l <= s.level_count(); ++l) {
                const int bi = level_bush[n][l - 1];
                if (bi < 0 || level_flow[n][l - 1].empty())
                    continue;
                shift_in_bush(bushes[bi], &level_flow[n][l - 1], s.tasks[l].node);
            }
        }
        // Moves between options: quit and the group's sequences.
        const int max_moves = cfg.max_moves_per_group > 0 ? cfg.max_moves_per_group
                                                          : 2 * static_cast<int>(seqs.size() + 1);
        for (int move = 0; move < max_moves; ++move) {
            refresh_group_labels(di);
            std::vector<std::pair<int, OptionCost>> opts;
            opts.push_back({-1, quit_cost(di, da_min(di))});
            for (int n : seqs)
                opts.push_back({n, option_cost(n, nullptr)});
            std::vector<char> rational(opts.size(), 1);
            for (std::size_t i = 1; i < opts.size(); ++i)
                rational[i] = individually_rational(opts[i].first);
            std::vector<int> sources;
            for (int i = 0; i < static_cast<int>(opts.size()); ++i)
                if (opts[i].second.flow > eps && std::isfinite(opts[i].second.source))
                    sources.push_back(i);
            std::stable_sort(sources.begin(), sources.end(),
                             [&](int a, int b) { return opts[a].second.source > opts[b].second.source; });
            bool moved = false;
            for (int si : sources) {
                const double cs = opts[si].second.source;
                int best = -1;
                double best_gain = 0.0;
                for (int ti = 0; ti < static_cast<int>(opts.size()); ++ti) {
                    if (ti == si)
                        continue;
                    const double gain = cs - opts[ti].second.target;
                    if (gain <= 1e-10 * (1.0 + std::abs(cs)))
                        continue;
                    if (move_capacity(di, opts[si].first, opts[ti].first) <= eps)
                        continue;
                    if (opts[ti].first >= 0 && !rational[ti])
                        continue;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best = ti;
                    }
                }
                if (best < 0)
                    continue;
                execute_move(di, opts[si].first, opts[best].first, best_gain);
                moved = true;
                break;
            }
            if (!moved)
                break;
        }
    }

    // Joining n leaves nobody worse off than quitting: the driver's cost is at most the solo drive and
    // every rider's cost at most the transit trip.
    bool individually_rational(int n) const
    {
        const SeqEval e = evaluate_sequence(n);
        const int di = seq_driver[n];
        const double da = da_min(di);
        if (e.rd > da + 1e-10 * (1.0 + std::abs(da)))
            return false;
        const auto& s = pool[n];
        for (std::size_t p = 0; p < s.passengers.size(); ++p) {
            const double pt = pt_min(od_index.at(s.passengers[p].od));
            if (e.rider[p] > pt + 1e-10 * (1.0 + std::abs(pt)))
                return false;
        }
        return true;
    }

    void refresh_group_labels(int di)
    {
        std::set<int> touched{da_bush[ods[di].o]};
        for (int n : driver_seqs[di]) {
            for (int bi : level_bush[n])
                if (bi >= 0)
                    touched.insert(bi);
            for (auto& [pi, c] : seq_riders[n])
                touched.insert(pt_bush[ods[pi].o]);
        }
        for (int bi : touched)
            relabel(bi);
    }

    // Per-link unit vehicle change and time-weighted cost coefficient of an option.
    void option_profile(int di, int option, bool as_source, std::vector<double>& veh, std::vector<double>& w) const
    {
        const double sign = as_source ? -1.0 : 1.0;
        if (option < 0) {
            const auto& br = bushes[da_bush[ods[di].o]];
            if (as_source) {
                for (auto& [a, s] : removal_shares(br, br.flow, ods[di].d)) {
                    veh[a] += sign * s;
                    w[a] += s * costs.da_a;
                }
            } else {
                for (int a : min_route(br.b, net, ods[di].d).links) {
                    veh[a] += sign;
                    w[a] += costs.da_a;
                }
            }
            return;
        }
        const auto& s = pool[option];
        for (int l = 1; l <= s.level_count(); ++l) {
            const int bi = level_bush[option][l - 1];
            if (bi < 0)
                continue;
            const auto& br = bushes[bi];
            const double coef = costs.layer_a[br.layer];
            if (as_source) {
                const auto& lf = level_flow[option][l - 1];
                if (lf.empty() || F[option] <= 0.0)
                    continue;
                for (int a = 0; a < net.link_count(); ++a) {
                    if (lf[a] <= 0.0)
                        continue;
                    const double sh = lf[a] / F[option];
                    veh[a] += sign * sh;
                    w[a] += sh * coef;
                }
            } else {
                for (int a : min_route(br.b, net, s.tasks[l].node).links) {
                    veh[a] += sign;
                    w[a] += coef;
                }
            }
        }
    }

    void execute_move(int di, int s, int t, double gain)
    {
        const int m = net.link_count();
        std::vector<double> veh(m, 0.0), wt(m, 0.0), ws(m, 0.0);
        option_profile(di, t, false, veh, wt);
        option_profile(di, s, true, veh, ws);
        double H = 0.0;
        for (int a = 0; a < m; ++a)
            H += costs.dtime[a] * veh[a] * (wt[a] - ws[a]);
        H = std::max(0.0, H);
        if (t >= 0 && al.mu[t] + al.rho * (F[t] - Z[t]) > 0.0)
            H += al.rho;
        if (s >= 0 && al.mu[s] + al.rho * (F[s] - Z[s]) > 0.0)
            H += al.rho;
        H += cfg.push_prox * gamma_M;
        const double cap = move_capacity(di, s, t);
        const double delta = H > 1e-15 ? std::min(cap, gain / H) : cap;
        if (delta <= 0.0)
            return;

        // Rider bookkeeping: net change per rider OD.
        std::map<int, int> net_riders;
        if (t >= 0)
            for (auto& [pi, c] : seq_riders[t])
                net_riders[pi] += c;
        if (s >= 0)
            for (auto& [pi, c] : seq_riders[s])
                net_riders[pi] -= c;

        // Remove the source.
        if (s < 0) {
            odf[di].quit_rd -= delta;
            remove_demand(da_for(ods[di].o), ods[di].d, delta);
        } else {
            scale_sequence(s, F[s] - delta);
        }
        // Add the target.
        if (t < 0) {
            odf[di].quit_rd += delta;
            add_demand(da_for(ods[di].o), ods[di].d, delta);
        } else {
            add_sequence_flow(t, delta);
        }
        for (auto& [pi, c] : net_riders) {
            if (c > 0) {
                const double take = std::min(odf[pi].quit_rp, c * delta);
                odf[pi].quit_rp -= take;
                remove_demand(pt_for(ods[pi].o), ods[pi].d, take);
            } else if (c < 0) {
                odf[pi].quit_rp += -c * delta;
                add_demand(pt_for(ods[pi].o), ods[pi].d, -c * delta);
            }
        }
        if (odf[di].quit_rd < 0.0)
            odf[di].quit_rd = 0.0;
    }

    // ---- modal costs and mode split --------------------------------------------------------

    struct SeqEval {
        double bundle = 0.0;
        double rd = 0.0;
        std::vector<double> rider; // per passenger in the sequence's passenger list
        double shared_len = 0.0;
        double total_len = 0.0;
    };

    SeqEval evaluate_sequence(int n) const
    {
        const auto& s = pool[n];
        SeqEval e;
        e.rider.assign(s.passengers.size(), 0.0);
        for (int l = 1; l <= s.level_count(); ++l) {
            const int bi = level_bush[n][l - 1];
            if (bi < 0)
                continue;
            const auto& br = bushes[bi];
            const Route r = min_route(br.b, net, s.tasks[l].node);
            const int k = s.onboard(l);
            for (int a : r.links) {
                const Link& link = net.links[a];
                const double t = costs.time[a];
                e.bundle += costs.layer[k][a];
                e.rd += class_link_cost(link, k > 0 ? LinkClass::RDLoaded : LinkClass::RDEmpty, t, problem.model);
                e.total_len += link.length;
                if (k > 0)
                    e.shared_len += link.length;
            }
            const double rp_level = [&] {
                double c = 0.0;
                for (int a : r.links)
                    c += class_link_cost(net.links[a], LinkClass::RP, costs.time[a], problem.model);
                return c;
            }();
            for (std::size_t p = 0; p < s.passengers.size(); ++p)
                if (s.passengers[p].pickup < l && l <= s.passengers[p].dropoff)
                    e.rider[p] += rp_level;
        }
        return e;
    }

    // The matching multiplier prices the whole group; the driver carries it up to the solo drive
    // cost and the riders keep their own costs.
    double driver_cost(int n, const SeqEval& e, double da) const
    {
        return e.rd + std::min(al_term(n), pos(da - e.rd));
    }

    ModalCosts modal_costs()
    {
        relabel_all();
        const double eps = eps_flow();
        ModalCosts mc;
        std::vector<SeqEval> ev(pool.size());
        for (const auto& s : pool)
            ev[s.id] = evaluate_sequence(s.id);
        std::vector<double> cda(ods.size()), cpt(ods.size());
        for (std::size_t i = 0; i < ods.size(); ++i) {
            cda[i] = da_min(static_cast<int>(i));
            cpt[i] = pt_min(static_cast<int>(i));
        }
        auto rider_cost = [&](int n, int pi) {
            double best = kInf;
            const auto& s = pool[n];
            for (std::size_t p = 0; p < s.passengers.size(); ++p)
                if (s.passengers[p].od == ods[pi])
                    best = std::min(best, ev[n].rider[p]);
            return best;
        };
        auto riders_available = [&](int n, int except) {
            for (auto& [pj, c] : seq_riders[n]) {
                if (pj == except)
                    continue;
                if (odf[pj].quit_rp <= eps || !(rider_cost(n, pj) < cpt[pj]))
                    return false;
            }
            return true;
        };
        for (std::size_t i = 0; i < ods.size(); ++i) {
            ModalValues c{};
            c[0] = cda[i];
            c[3] = cpt[i];
            // A mode that carries flow is costed by what its users realize: matched flow at the
            // sequence cost, the unmatched share at the quit cost. Otherwise by the best option an
            // entrant could join.
            double rd = cda[i];
            double acc = odf[i].quit_rd * cda[i], w = odf[i].quit_rd;
            for (int n : driver_seqs[i]) {
                acc += F[n] * driver_cost(n, ev[n], cda[i]);
                w += F[n];
            }
            if (odf[i].q[1] > eps && w > eps) {
                rd = acc / w;
            } else {
                for (int n : driver_seqs[i])
                    if (riders_available(n, -1))
                        rd = std::min(rd, driver_cost(n, ev[n], cda[i]));
            }
            c[1] = rd;
            double rp = cpt[i];
            acc = odf[i].quit_rp * cpt[i];
            w = odf[i].quit_rp;
            for (int n : rider_seqs[i]) {
                const double k = pool[n].passenger_count(ods[i]) * F[n];
                acc += k * rider_cost(n, static_cast<int>(i));
                w += k;
            }
            if (odf[i].q[2] > eps && w > eps) {
                rp = acc / w;
            } else {
                for (int n : rider_seqs[i]) {
                    const int di = seq_driver[n];
                    if (odf[di].quit_rd <= eps || !(driver_cost(n, ev[n], cda[di]) < cda[di]))
                        continue;
                    if (!riders_available(n, static_cast<int>(i)))
                        continue;
                    rp = std::min(rp, rider_cost(n, static_cast<int>(i)));
                }
            }
            c[2] = rp;
            mc.cost[ods[i]] = c;
            double shared = 0.0, total = 0.0;
            for (int n : driver_seqs[i]) {
                shared += F[n] * ev[n].shared_len;
                total += F[n] * ev[n].total_len;
            }
            mc.gamma[ods[i]] = total > 0.0 ? shared / total : 0.0;
        }
        return mc;
    }

    void apply_mode_change(int i, const ModalValues& target)
    {
        const OD od = ods[i];
        ODFlows& f = odf[i];
        // Losses first.
        for (int m = 0; m < kModeCount; ++m) {
            const double loss = f.q[m] - target[m];
            if (loss <= 0.0)
                continue;
            const Mode mode = static_cast<Mode>(m);
            if (mode == Mode::DA) {
                remove_demand(da_for(od.o), od.d, loss);
            } else if (mode == Mode::PT) {
                remove_demand(pt_for(od.o), od.d, loss);
            } else if (mode == Mode::RD) {
                const double r1 = std::min(loss, f.quit_rd);
                f.quit_rd -= r1;
                remove_demand(da_for(od.o), od.d, r1);
                double r2 = loss - r1;
                double matched = 0.0;
                for (int n : driver_seqs[i])
                    matched += F[n];
                if (r2 > 0.0 && matched > 0.0) {
                    const double frac = std::min(1.0, r2 / matched);
                    for (int n : driver_seqs[i])
                        reduce_sequence(n, F[n] * frac, false, -1);
                }
            } else {
                const double r1 = std::min(loss, f.quit_rp);
                f.quit_rp -= r1;
                remove_demand(pt_for(od.o), od.d, r1);
                double r2 = loss - r1;
                double matched = 0.0;
                for (int n : rider_seqs[i])
                    matched += pool[n].passenger_count(od) * F[n];
                if (r2 > 0.0 && matched > 0.0) {
                    const double frac = std::min(1.0, r2 / matched);
                    for (int n : rider_seqs[i])
                        reduce_sequence(n, F[n] * frac, true, static_cast<int>(i));
                }
            }
            f.q[m] -= loss;
        }
        for (int m = 0; m < kModeCount; ++m) {
            const double gain = target[m] - f.q[m];
            if (gain <= 0.0)
                continue;
            const Mode mode = static_cast<Mode>(m);
            if (mode == Mode::DA || mode == Mode::RD)
                add_demand(da_for(od.o), od.d, gain);
            else
                add_demand(pt_for(od.o), od.d, gain);
            if (mode == Mode::RD)
                f.quit_rd += gain;
            if (mode == Mode::RP)
                f.quit_rp += gain;
            f.q[m] += gain;
        }
        // Keep the split exactly conservative.
        double sum = 0.0;
        for (double v : f.q)
            sum += v;
        const double drift = f.demand - sum;
        if (drift != 0.0) {
            int best = 0;
            for (int m = 1; m < kModeCount; ++m)
                if (f.q[m] > f.q[best])
                    best = m;
            f.q[best] += drift;
        }
    }

    void mode_split_pass()
    {
        if (!cfg.mode_choice)
            return;
        const ModalCosts mc = modal_costs();
        double change2 = 0.0;
        for (std::size_t i = 0; i < ods.size(); ++i) {
            const auto& c = mc.cost.at(ods[i]);
            if (odf[i].demand <= 0.0)
                continue;
            double mean = 0.0;
            int cnt = 0;
            for (double v : c)
                if (std::isfinite(v)) {
                    mean += v;
                    ++cnt;
                }
            mean = cnt > 0 ? mean / cnt : 1.0;
            const double theta = cfg.mode_step * odf[i].demand / (gamma_M * std::max(mean, 1e-12));
            const ModalValues target = mode_split_step(odf[i].q, c, theta);
            for (int m = 0; m < kModeCount; ++m)
                change2 += (target[m] - odf[i].q[m]) * (target[m] - odf[i].q[m]);
            apply_mode_change(static_cast<int>(i), target);
        }
        const double change = std::sqrt(change2);
        if (prev_mode_change >= 0.0)
            gamma_M += change > prev_mode_change ? cfg.gamma_large : cfg.gamma_small;
        prev_mode_change = change;
    }

    void matching_pass()
    {
        if (pool.empty())
            return;
        const double scale = max_R > 0.0 ? cfg.match_step * mean_q / max_R : 0.0;
        const double theta2 = scale / gamma_Z;
        std::vector<double> y = Z;
        for (const auto& s : pool)
            y[s.id] += theta2 * s.R;
        const auto next = project_matching(pool, y, modal_map(Mode::RD), modal_map(Mode::RP));
        double change2 = 0.0;
        for (std::size_t n = 0; n < Z.size(); ++n)
            change2 += (next[n] - Z[n]) * (next[n] - Z[n]);
        Z = next;
        const double change = std::sqrt(change2);
        if (prev_match_change >= 0.0)
            gamma_Z += change > prev_match_change * (1.0 + 1e-12) && change > 1e-9 * (1.0 + mean_q) ? cfg.gamma_large
                                                                                                 : cfg.gamma_small;
        prev_match_change = change;
    }

    // ---- gaps ------------------------------------------------------------------------------

    GapReport gaps()
    {
        GapReport g;
        g.inner_iteration = inner_iter;
        g.outer_iteration = outer_iter;
        if (total_q <= 0.0)
            return g;
        if (!cfg.immediate_cost_refresh)
            refresh_all_costs();
        relabel_all();
        if (cfg.mode_choice) {
            const ModalCosts mc = modal_costs();
            double s = 0.0;
            for (std::size_t i = 0; i < ods.size(); ++i) {
                const auto& c = mc.cost.at(ods[i]);
                const double best = *std::min_element(c.begin(), c.end());
                for (int m = 0; m < kModeCount; ++m)
                    if (odf[i].q[m] > 0.0 && std::isfinite(c[m]))
                        s += odf[i].q[m] * (c[m] - best);
            }
            g.G_M = s / total_q;
        }
        // Route gaps against full shortest paths.
        std::map<int, std::vector<double>> sp; // bush index -> shortest distances
        auto shortest = [&](int bi) -> const std::vector<double>& {
            auto it = sp.find(bi);
            if (it == sp.end())
                it = sp.emplace(bi, dijkstra(net, bushes[bi].b.root, layer_cost(bushes[bi].layer)).dist).first;
            return it->second;
        };
        double rg = 0.0;
        for (int bi = 0; bi < static_cast<int>(bushes.size()); ++bi) {
            const auto& br = bushes[bi];
            if (br.layer != kLayerDA && br.layer != kLayerPT)
                continue;
            const auto& c = layer_cost(br.layer);
            double tot = 0.0;
            for (int a = 0; a < net.link_count(); ++a)
                tot += br.flow[a] * c[a];
            const auto& d = shortest(bi);
            for (auto& [dest, q] : br.demand)
                tot -= q * d[dest];
            rg += pos(tot);
        }
        std::vector<double> sp_seq(pool.size(), 0.0);
        for (const auto& s : pool) {
            double c = 0.0;
            for (int l = 1; l <= s.level_count(); ++l) {
                const int bi = level_bush[s.id][l - 1];
                if (bi < 0)
                    continue;
                const auto& d = shortest(bi);
                c += d[s.tasks[l].node];
                const auto& lf = level_flow[s.id][l - 1];
                if (lf.empty() || F[s.id] <= 0.0)
                    continue;
                const auto& lc = layer_cost(bushes[bi].layer);
                double tot = 0.0;
                for (int a = 0; a < net.link_count(); ++a)
                    tot += lf[a] * lc[a];
                rg += pos(tot - F[s.id] * d[s.tasks[l].node]);
            }
            sp_seq[s.id] = c;
        }
        // Sequence gaps: best feasible move out of every used option.
        const double eps = eps_flow();
        double sg = 0.0;
        for (int di = 0; di < static_cast<int>(ods.size()); ++di) {
            if (driver_seqs[di].empty())
                continue;
            const auto& dd = shortest(da_bush[ods[di].o]);
            std::vector<std::pair<int, OptionCost>> opts;
            opts.push_back({-1, quit_cost(di, dd[ods[di].d])});
            for (int n : driver_seqs[di])
                opts.push_back({n, option_cost(n, &sp_seq)});
            for (auto& [si, so] : opts) {
                if (so.flow <= eps)
                    continue;
                double best = 0.0;
                for (auto& [ti, to] : opts) {
                    if (ti == si)
                        continue;
                    const double cap = move_capacity(di, si, ti);
                    if (cap <= eps || (ti >= 0 && !individually_rational(ti)))
                        continue;
                    best = std::max(best, (so.source - to.target) * std::min(cap, so.flow));
                }
                sg += best;
            }
        }
        g.route_gap = rg / total_q;
        g.sequence_gap = sg / total_q;
        g.G_N = g.route_gap + g.sequence_gap;
        double viol = 0.0;
        for (std::size_t n = 0; n < F.size(); ++n)
            viol += pos(F[n] - Z[n]);
        g.violation = viol / total_q;
        return g;
    }

    double total_cost() const
    {
        double g = 0.0;
        for (const auto& br : bushes) {
            if (br.layer != kLayerDA && br.layer != kLayerPT)
                continue;
            const auto& c = layer_cost(br.layer);
            for (int a = 0; a < net.link_count(); ++a)
                g += br.flow[a] * c[a];
        }
        for (const auto& s : pool)
            for (int l = 1; l <= s.level_count(); ++l) {
                const int bi = level_bush[s.id][l - 1];
                const auto& lf = level_flow[s.id][l - 1];
                if (bi < 0 || lf.empty())
                    continue;
                const auto& lc = layer_cost(bushes[bi].layer);
                for (int a = 0; a < net.link_count(); ++a)
                    g += lf[a] * lc[a];
            }
        return g;
    }

    std::vector<double> violations() const
    {
        std::vector<double> h(F.size());
        for (std::size_t n = 0; n < F.size(); ++n)
            h[n] = F[n] - Z[n];
        return h;
    }

    void seed_al()
    {
        relabel_all();
        const auto h = violations();
        const double tiny = eps_flow();
        for (std::size_t di = 0; di < ods.size(); ++di) {
            if (driver_seqs[di].empty())
                continue;
            const double quit = da_min(static_cast<int>(di));
            for (int n : driver_seqs[di]) {
                if (h[n] < -tiny)
                    continue;
                double pt_in = 0.0;
                for (auto& [pi, c] : seq_riders[n])
                    pt_in += c * pt_min(pi);
                const double rel = seq_min_cost(n) - pt_in;
                al.mu[n] = pos(quit - rel);
            }
        }
        double hp = 0.0, hn = 0.0;
        for (double v : h) {
            hp += pos(v);
            hn += pos(v) * pos(v);
        }
        const double g = total_cost();
        al.rho = (g / total_q) / std::max(hp, cfg.eps_3 * total_q);
        al.prev_violation_norm = std::sqrt(hn);
        al.seeded = true;
    }

    bool all_acyclic() const
    {
        for (const auto& br : bushes)
            if (!br.b.is_acyclic(net))
                return false;
        return true;
    }

    SolutionFlows snapshot() const
    {
        SolutionFlows s;
        for (std::size_t i = 0; i < ods.size(); ++i)
            s.od[ods[i]] = odf[i];
        s.F = F;
        s.Z = Z;
        s.mu = al.mu;
        s.rho = al.rho;
        s.level_flows = level_flow;
        for (int o = 1; o <= net.node_count; ++o) {
            if (da_bush[o] >= 0)
                s.da_flows[o] = bushes[da_bush[o]].flow;
            if (pt_bush[o] >= 0)
                s.pt_flows[o] = bushes[pt_bush[o]].flow;
        }
        return s;
    }

    void notify(const GapReport& g)
    {
        if (!observer)
            return;
        const SolutionFlows s = snapshot();
        InnerSnapshot snap;
        snap.inner_iteration = inner_iter;
        snap.outer_iteration = outer_iter;
        snap.flows = &s;
        snap.pool = &pool;
        snap.net = &net;
        snap.bushes_acyclic = all_acyclic();
        snap.gap = g;
        observer(snap);
    }

    EquilibriumSolution make_report(bool converged)
    {
        EquilibriumSolution out;
        if (!cfg.immediate_cost_refresh)
            refresh_all_costs();
        relabel_all();
        out.flows = snapshot();
        out.costs = costs;
        out.modal = modal_costs();
        out.history = history;
        out.final_gap = history.empty() ? GapReport{} : history.back();
        out.inner_iterations = inner_iter;
        out.outer_iterations = outer_iter;
        out.converged = converged;
        out.generalized_total = total_cost();

        std::vector<SeqEval> ev(pool.size());
        for (const auto& s : pool)
            ev[s.id] = evaluate_sequence(s.id);
        std::vector<double> multiplier(ods.size(), 0.0), price(ods.size(), 0.0);
        for (std::size_t di = 0; di < ods.size(); ++di) {
            double best = da_min(static_cast<int>(di));
            int used = -1;
            for (int n : driver_seqs[di]) {
                best = std::min(best, option_cost(n, nullptr).target);
                if (F[n] > eps_flow() && (used < 0 || F[n] > F[used]))
                    used = n;
            }
            price[di] = best;
            multiplier[di] = used >= 0 ? best - ev[used].rd : 0.0;
        }
        for (const auto& s : pool) {
            SequenceReport r;
            r.id = s.id;
            r.driver = s.driver;
            r.label = s.label();
            r.R = s.R;
            r.min_cost = ev[s.id].bundle;
            double mx = 0.0;
            for (int l = 1; l <= s.level_count(); ++l) {
                const int bi = level_bush[s.id][l - 1];
                if (bi < 0)
                    continue;
                const auto& br = bushes[bi];
                const auto& lf = level_flow[s.id][l - 1];
                static const std::vector<double> none;
                const MaxLabels ml = max_labels(br.b, net, layer_cost(br.layer), lf.empty() ? none : lf);
                mx += ml.label[s.tasks[l].node];
            }
            r.max_cost = mx;
            r.rd_cost = ev[s.id].rd;
            for (std::size_t p = 0; p < s.passengers.size(); ++p)
                r.rider_costs.push_back({s.passengers[p].od, ev[s.id].rider[p]});
            const int di = seq_driver[s.id];
            r.generalized_cost = ev[s.id].rd + multiplier[di];
            r.F = F[s.id];
            r.Z = Z[s.id];
            r.mu = al.mu[s.id];
            out.sequences.push_back(std::move(r));
        }
        for (std::size_t i = 0; i < ods.size(); ++i) {
            ODReport r;
            r.od = ods[i];
            r.flows = odf[i];
            r.cost = out.modal.cost.at(ods[i]);
            r.rd_generalized = price[i];
            out.ods.push_back(r);
        }
        return out;
    }

    EquilibriumSolution solve()
    {
        if (!initialized)
            initialize();
        if (total_q <= 0.0) {
            GapReport g;
            history.push_back(g);
            notify(g);
            return make_report(true);
        }
        bool converged = false;
        for (outer_iter = 1; outer_iter <= cfg.outer_cap; ++outer_iter) {
            bool inner_ok = false;
            for (int it = 0; it < cfg.inner_cap; ++it) {
                ++inner_iter;
                mode_split_pass();
                matching_pass();
                bush_update_pass();
                route_pass();
                group_pass();
                GapReport g = gaps();
                history.push_back(g);
                notify(g);
                if (cfg.log_every > 0 && inner_iter % cfg.log_every == 0)
                    std::clog << "outer " << outer_iter << " inner " << inner_iter << ": G_M " << g.G_M << " G_N "
                              << g.G_N << " (route " << g.route_gap << ", sequence " << g.sequence_gap
                              << ") violation " << g.violation << std::endl;
                if (it + 1 >= cfg.min_inner_iterations && g.G_M <= cfg.eps_m && g.G_N <= cfg.eps_n) {
                    inner_ok = true;
                    break;
                }
            }
            const auto h = violations();
            if (!al.seeded)
                seed_al();
            else
                update_al(al, h);
            const double A = al_value(al.mu, al.rho, h);
            const double g = total_cost();
            const double ratio = std::abs(A) / (std::abs(A) + g);
            double viol = 0.0;
            for (double v : h)
                viol += pos(v);
            history.back().al_ratio = ratio;
            history.back().violation = viol / total_q;
            if (inner_ok && ratio <= cfg.eps_3 && viol / total_q <= cfg.eps_3) {
                converged = true;
                break;
            }
        }
        outer_iter = std::min(outer_iter, cfg.outer_cap);
        return make_report(converged);
    }
};

EquilibriumSolver::EquilibriumSolver(const Problem& problem, SolverConfig config)
    : impl_(std::make_unique<Impl>(problem, config))
{
}

EquilibriumSolver::~EquilibriumSolver() = default;

void EquilibriumSolver::initialize() { impl_->initialize(); }

EquilibriumSolution EquilibriumSolver::solve() { return impl_->solve(); }

void EquilibriumSolver::set_cost_model(const CostModel& model)
{
    model.validate();
    impl_->problem.model = model;
    if (impl_->initialized)
        impl_->refresh_all_costs();
    // A new parameter point restarts the step-size schedule from the warm flows.
    impl_->gamma_M = impl_->gamma_Z = impl_->cfg.gamma0;
    impl_->prev_mode_change = impl_->prev_match_change = -1.0;
}

void EquilibriumSolver::set_observer(std::function<void(const InnerSnapshot&)> fn) { impl_->observer = std::move(fn); }

void EquilibriumSolver::mode_split_pass() { impl_->mode_split_pass(); }
void EquilibriumSolver::matching_pass() { impl_->matching_pass(); }
void EquilibriumSolver::bush_update_pass() { impl_->bush_update_pass(); }
void EquilibriumSolver::route_pass() { impl_->route_pass(); }
void EquilibriumSolver::group_pass() { impl_->group_pass(); }
GapReport EquilibriumSolver::compute_gaps() { return impl_->gaps(); }
ModalCosts EquilibriumSolver::compute_modal_costs() { return impl_->modal_costs(); }
SolutionFlows EquilibriumSolver::snapshot() const { return impl_->snapshot(); }
EquilibriumSolution EquilibriumSolver::report() { return impl_->make_report(false); }
const ALParams& EquilibriumSolver::al() const { return impl_->al; }

EquilibriumSolution solve(const Problem& problem, const SolverConfig& config)
{
    EquilibriumSolver s(problem, config);
    s.initialize();
    return s.solve();
}

} // namespace seqbush
