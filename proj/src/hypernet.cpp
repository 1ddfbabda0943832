#include "seqbush/hypernet.hpp"

#include <algorithm>

namespace seqbush {

std::vector<LevelOD> level_ods(const MatchingSequence& seq)
{
    std::vector<LevelOD> out;
    for (int l = 1; l <= seq.level_count(); ++l)
        out.push_back({l, seq.tasks[l - 1].node, seq.tasks[l].node});
    return out;
}

std::map<OD, ODClassSets> build_flow_classes(const std::vector<MatchingSequence>& pool, const std::vector<OD>& ods)
{
    std::map<OD, ODClassSets> sets;
    for (const OD& od : ods)
        sets[od];
    for (const auto& seq : pool) {
        auto& drv = sets[seq.driver];
        for (int l = 1; l <= seq.level_count(); ++l)
            drv.rd.push_back({ClassKind::RD, seq.id, l, seq.B[l - 1], -1});
        for (int p = 0; p < static_cast<int>(seq.passengers.size()); ++p) {
            const auto& pv = seq.passengers[p];
            // Rider classes span the first on-board level through the drop-off task.
            const int u = pv.pickup + 1;
            for (int l = u; l <= pv.dropoff; ++l)
                sets[pv.od].rp.push_back({ClassKind::RP, seq.id, l, u, p});
        }
    }
    return sets;
}

std::vector<Injection> sequence_demand_vector(const std::vector<MatchingSequence>& pool, const std::vector<double>& F,
                                              const std::map<OD, ODClassSets>& classes,
                                              const std::map<OD, std::array<double, 3>>& solo)
{
    require(F.size() == pool.size(), "sequence_demand_vector: F size mismatch");
    std::vector<Injection> out;
    for (const auto& [od, sets] : classes) {
        for (const auto& c : sets.rd) {
            const auto& seq = pool.at(c.seq);
            const double f = F[c.seq];
            require(f >= 0.0, "sequence_demand_vector: negative sequence flow");
            out.push_back({c, od, seq.tasks[c.level - 1].node, f});
            out.push_back({c, od, seq.tasks[c.level].node, -f});
        }
        for (const auto& c : sets.rp) {
            const auto& seq = pool.at(c.seq);
            const auto& pv = seq.passengers.at(c.passenger);
            const double f = F[c.seq];
            // A rider enters at the pickup level and leaves at the drop-off level; intermediate levels
            // chain through the shared vehicle.
            if (c.level == c.tag)
                out.push_back({c, od, od.o, f});
            else
                out.push_back({c, od, seq.tasks[c.level - 1].node, 0.0});
            if (c.level == pv.dropoff)
                out.push_back({c, od, od.d, -f});
            else
                out.push_back({c, od, seq.tasks[c.level].node, 0.0});
        }
        std::array<double, 3> s{0.0, 0.0, 0.0};
        if (auto it = solo.find(od); it != solo.end())
            s = it->second;
        out.push_back({sets.da, od, od.o, s[0]});
        out.push_back({sets.da, od, od.d, -s[0]});
        out.push_back({sets.pt, od, od.o, s[1]});
        out.push_back({sets.pt, od, od.d, -s[1]});
        out.push_back({sets.rp_quit, od, od.o, s[2]});
        out.push_back({sets.rp_quit, od, od.d, -s[2]});
    }
    return out;
}

ClassCoeffs layer_coeffs(const CostModel& model, int onboard)
{
    require(onboard >= 0, "layer_coeffs: negative occupancy");
    if (onboard == 0)
        return model.coeffs(LinkClass::RDEmpty);
    ClassCoeffs c = model.coeffs(LinkClass::RDLoaded);
    const ClassCoeffs rp = model.coeffs(LinkClass::RP);
    c.a += onboard * rp.a;
    c.b += onboard * rp.b;
    c.fixed += onboard * rp.fixed;
    return c;
}

void LinkCosts::evaluate(const Network& net, const CostModel& model, const std::vector<double>& vehicles,
                         int max_onboard)
{
    const int m = net.link_count();
    require(static_cast<int>(vehicles.size()) == m, "LinkCosts::evaluate: flow vector size mismatch");
    time.resize(m);
    dtime.resize(m);
    pt_time.resize(m);
    da.resize(m);
    pt.resize(m);
    layer.assign(max_onboard + 1, std::vector<double>(m));
    layer_a.assign(max_onboard + 1, 0.0);
    da_a = model.coeffs(LinkClass::DA).a;
    pt_a = model.coeffs(LinkClass::PT).a * model.pt_time_response();
    for (int k = 0; k <= max_onboard; ++k)
        layer_a[k] = layer_coeffs(model, k).a;
    for (int a = 0; a < m; ++a)
        update_link(net, model, a, vehicles[a]);
}

void LinkCosts::update_link(const Network& net, const CostModel& model, int a, double vehicles)
{
    const Link& link = net.links[a];
    const double x = std::max(0.0, vehicles);
    time[a] = link_travel_time(link, x);
    dtime[a] = link_travel_time_derivative(link, x);
    pt_time[a] = model.pt_link_time(link, time[a]);
    da[a] = model.coeffs(LinkClass::DA)(time[a], link.length);
    pt[a] = model.coeffs(LinkClass::PT)(pt_time[a], link.length);
    for (std::size_t k = 0; k < layer.size(); ++k)
        layer[k][a] = layer_coeffs(model, static_cast<int>(k))(time[a], link.length);
}

double LinkCosts::class_cost(const Network& net, const CostModel& model, LinkClass cls, int a) const
{
    return class_link_cost(net.links[a], cls, time[a], model);
}

std::vector<double> SolutionFlows::vehicle_flows(int link_count) const
{
    std::vector<double> x(link_count, 0.0);
    for (const auto& [o, f] : da_flows)
        for (int a = 0; a < link_count && a < static_cast<int>(f.size()); ++a)
            x[a] += f[a];
    for (const auto& levels : level_flows)
        for (const auto& f : levels)
            for (int a = 0; a < static_cast<int>(f.size()); ++a)
                x[a] += f[a];
    return x;
}

std::vector<double> SolutionFlows::pt_link_flows(int link_count) const
{
    std::vector<double> x(link_count, 0.0);
    for (const auto& [o, f] : pt_flows)
        for (int a = 0; a < link_count && a < static_cast<int>(f.size()); ++a)
            x[a] += f[a];
    return x;
}

double SolutionFlows::matched_drivers(const std::vector<MatchingSequence>& pool, const OD& od) const
{
    double s = 0.0;
    for (const auto& seq : pool)
        if (seq.driver == od)
            s += F[seq.id];
    return s;
}

double SolutionFlows::matched_riders(const std::vector<MatchingSequence>& pool, const OD& od) const
{
    double s = 0.0;
    for (const auto& seq : pool)
        s += seq.passenger_count(od) * F[seq.id];
    return s;
}

double SolutionFlows::total_demand() const
{
    double s = 0.0;
    for (const auto& [od, f] : od)
        s += f.demand;
    return s;
}

} // namespace seqbush
