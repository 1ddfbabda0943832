#include "seqbush/matchgen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace seqbush {

const char* task_kind_name(TaskKind k)
{
    switch (k) {
    case TaskKind::DriverDepart:
        return "depart";
    case TaskKind::DriverArrive:
        return "arrive";
    case TaskKind::Pickup:
        return "pickup";
    case TaskKind::Dropoff:
        return "dropoff";
    }
    return "?";
}

std::vector<int> MatchingSequence::nodes() const
{
    std::vector<int> out;
    out.reserve(tasks.size());
    for (const auto& t : tasks)
        out.push_back(t.node);
    return out;
}

int MatchingSequence::passenger_count(const OD& od) const
{
    int c = 0;
    for (const auto& p : passengers)
        c += p.od == od;
    return c;
}

std::vector<std::pair<OD, int>> MatchingSequence::passenger_groups() const
{
    std::map<OD, int> m;
    for (const auto& p : passengers)
        ++m[p.od];
    return {m.begin(), m.end()};
}

int MatchingSequence::s1(int task, const OD& od) const
{
    const Task& t = tasks.at(task);
    return (t.kind == TaskKind::DriverDepart || t.kind == TaskKind::Pickup) && t.od == od;
}

int MatchingSequence::s_minus1(int task, const OD& od) const
{
    const Task& t = tasks.at(task);
    return (t.kind == TaskKind::DriverArrive || t.kind == TaskKind::Dropoff) && t.od == od;
}

std::string MatchingSequence::label() const
{
    std::ostringstream s;
    s << '(';
    for (std::size_t i = 0; i < tasks.size(); ++i)
        s << (i ? "," : "") << tasks[i].node;
    s << ')';
    return s.str();
}

OccupancyProfile occupancy_profile(const MatchingSequence& seq)
{
    const auto& tasks = seq.tasks;
    if (tasks.size() < 2)
        throw InfeasibleSequence("sequence needs at least a departure and an arrival");
    if (tasks.front().kind != TaskKind::DriverDepart || tasks.back().kind != TaskKind::DriverArrive)
        throw InfeasibleSequence("sequence must start with departure and end with arrival");
    OccupancyProfile prof;
    int occ = 0;
    prof.occupancy.push_back(0);
    for (std::size_t l = 1; l < tasks.size(); ++l) {
        const Task& t = tasks[l];
        if (t.kind == TaskKind::Pickup)
            ++occ;
        else if (t.kind == TaskKind::Dropoff)
            --occ;
        else if (t.kind == TaskKind::DriverDepart || l + 1 != tasks.size())
            throw InfeasibleSequence("driver tasks are only allowed at both ends");
        if (occ < 0)
            throw InfeasibleSequence("drop-off before pickup at task " + std::to_string(l));
        prof.occupancy.push_back(occ);
    }
    if (occ != 0)
        throw InfeasibleSequence("passengers left on board at arrival");
    for (std::size_t l = 1; l < tasks.size(); ++l)
        prof.B.push_back(prof.occupancy[l - 1] == 0 ? -1 : 0);
    return prof;
}

void refresh_sequence(MatchingSequence& seq, const SkimMatrix* skim)
{
    const auto prof = occupancy_profile(seq);
    seq.occupancy = prof.occupancy;
    seq.B = prof.B;
    seq.passengers.clear();
    // Same-OD passengers are paired first-in first-out.
    std::map<OD, std::vector<int>> waiting;
    for (std::size_t l = 0; l < seq.tasks.size(); ++l) {
        Task& t = seq.tasks[l];
        if (t.kind == TaskKind::Pickup) {
            t.passenger = static_cast<int>(seq.passengers.size());
            seq.passengers.push_back({t.od, static_cast<int>(l), -1});
            waiting[t.od].push_back(t.passenger);
        } else if (t.kind == TaskKind::Dropoff) {
            auto& q = waiting[t.od];
            if (q.empty())
                throw InfeasibleSequence("drop-off without matching pickup for " + to_string(t.od));
            t.passenger = q.front();
            q.erase(q.begin());
            seq.passengers[t.passenger].dropoff = static_cast<int>(l);
        } else {
            t.passenger = -1;
        }
    }
    if (skim) {
        seq.R = sequence_vkt_saving(seq, *skim);
        double tt = 0.0;
        for (std::size_t l = 1; l < seq.tasks.size(); ++l)
            tt += skim->t(seq.tasks[l - 1].node, seq.tasks[l].node);
        seq.free_flow_time = tt;
    }
}

namespace {

struct Generator {
    const RdRpGroup& group;
    const GenerationOptions& opt;
    const SkimMatrix& skim;
    double time_budget = 0.0;
    std::vector<double> ride_budget;
    std::vector<int> state;           // 0 waiting, 1 on board, 2 delivered
    std::vector<double> pickup_time;
    std::vector<Task> prefix;
    std::vector<MatchingSequence> out;

    double leg(int a, int b) const { return a == b ? 0.0 : skim.t(a, b); }

    // FIFO among identical ODs: passenger i may only act after the previous same-OD passenger did.
    bool fifo_ok(int i, int next_state) const
    {
        for (int j = 0; j < i; ++j)
            if (group.passengers[j] == group.passengers[i] && state[j] < next_state)
                return false;
        return true;
    }

    void recurse(double elapsed, int onboard)
    {
        const int here = prefix.back().node;
        bool all_done = true;
        for (std::size_t i = 0; i < state.size(); ++i)
            all_done = all_done && state[i] == 2;
        if (all_done) {
            const double total = elapsed + leg(here, group.driver.d);
            if (total > time_budget + 1e-9)
                return;
            MatchingSequence seq;
            seq.driver = group.driver;
            seq.tasks = prefix;
            seq.tasks.push_back({TaskKind::DriverArrive, group.driver.d, group.driver, -1});
            refresh_sequence(seq, &skim);
            out.push_back(std::move(seq));
            return;
        }
        for (std::size_t i = 0; i < state.size(); ++i) {
            const OD& p = group.passengers[i];
            if (state[i] == 0) {
                if (onboard + 1 > opt.capacity || !fifo_ok(static_cast<int>(i), 1))
                    continue;
                const double t = elapsed + leg(here, p.o);
                // The remaining route still has to reach this drop-off and the driver destination.
                if (t + leg(p.o, p.d) + leg(p.d, group.driver.d) > time_budget + 1e-9)
                    continue;
                state[i] = 1;
                pickup_time[i] = t;
                prefix.push_back({TaskKind::Pickup, p.o, p, -1});
                recurse(t, onboard + 1);
                prefix.pop_back();
                state[i] = 0;
            } else if (state[i] == 1) {
                if (!fifo_ok(static_cast<int>(i), 2))
                    continue;
                const double t = elapsed + leg(here, p.d);
                if (t + leg(p.d, group.driver.d) > time_budget + 1e-9)
                    continue;
                if (ride_budget[i] > 0.0 && t - pickup_time[i] > ride_budget[i] + 1e-9)
                    continue;
                state[i] = 2;
                prefix.push_back({TaskKind::Dropoff, p.d, p, -1});
                recurse(t, onboard - 1);
                prefix.pop_back();
                state[i] = 1;
            }
        }
    }
};

} // namespace

std::vector<MatchingSequence> generate_sequences(const RdRpGroup& group, const GenerationOptions& opt,
                                                 const SkimMatrix& skim)
{
    require(opt.detour_factor >= 1.0, "generate_sequences: detour factor must be >= 1");
    require(opt.capacity >= 0, "generate_sequences: negative capacity");
    require(std::is_sorted(group.passengers.begin(), group.passengers.end()),
            "generate_sequences: passenger multiset must be sorted");
    const double solo = skim.t(group.driver.o, group.driver.d);
    if (!std::isfinite(solo))
        throw ValidationError("driver OD " + to_string(group.driver) + " is not connected");
    Generator g{group, opt, skim};
    g.time_budget = opt.detour_factor * solo;
    g.state.assign(group.passengers.size(), 0);
    g.pickup_time.assign(group.passengers.size(), 0.0);
    for (const OD& p : group.passengers) {
        const double own = skim.t(p.o, p.d);
        if (!std::isfinite(own))
            return {};
        g.ride_budget.push_back(opt.passenger_detour_factor > 0.0 ? opt.passenger_detour_factor * own : 0.0);
    }
    if (static_cast<int>(group.passengers.size()) > 0 && opt.capacity == 0)
        return {};
    g.prefix.push_back({TaskKind::DriverDepart, group.driver.o, group.driver, -1});
    g.recurse(0.0, 0);
    return std::move(g.out);
}

std::vector<RdRpGroup> enumerate_groups(const OD& driver, const std::vector<OD>& candidate_passengers,
                                        const GenerationOptions& opt, const SkimMatrix& skim)
{
    std::vector<OD> cands = candidate_passengers;
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    std::vector<RdRpGroup> result;
    RdRpGroup solo{driver, {}, {}};
    solo.sequences = generate_sequences(solo, opt, skim);
    if (!solo.feasible())
        return result;
    result.push_back(solo);

    const int max_size = std::min(opt.max_passengers, opt.capacity > 0 ? opt.max_passengers : 0);
    std::set<std::vector<OD>> feasible_prev{{}};
    std::vector<std::vector<OD>> frontier{{}};
    for (int size = 1; size <= max_size; ++size) {
        std::set<std::vector<OD>> feasible_now;
        std::vector<std::vector<OD>> next;
        for (const auto& base : frontier) {
            // Extend in sorted order so each multiset is produced once.
            const auto start = base.empty() ? cands.begin() : std::lower_bound(cands.begin(), cands.end(), base.back());
            for (auto it = start; it != cands.end(); ++it) {
                std::vector<OD> members = base;
                members.push_back(*it);
                bool subsets_ok = true;
                for (std::size_t drop = 0; drop < members.size() && subsets_ok; ++drop) {
                    std::vector<OD> sub = members;
                    sub.erase(sub.begin() + static_cast<long>(drop));
                    subsets_ok = feasible_prev.count(sub) > 0;
                }
                if (!subsets_ok)
                    continue;
                RdRpGroup grp{driver, members, {}};
                grp.sequences = generate_sequences(grp, opt, skim);
                if (!grp.feasible())
                    continue;
                feasible_now.insert(members);
                next.push_back(members);
                result.push_back(std::move(grp));
            }
        }
        feasible_prev = std::move(feasible_now);
        frontier = std::move(next);
        if (frontier.empty())
            break;
    }
    return result;
}

double sequence_vkt_saving(const MatchingSequence& seq, const SkimMatrix& skim)
{
    double solo = skim.d(seq.driver.o, seq.driver.d);
    for (const auto& p : seq.passengers)
        solo += skim.d(p.od.o, p.od.d);
    double route = 0.0;
    for (std::size_t l = 1; l < seq.tasks.size(); ++l) {
        const int a = seq.tasks[l - 1].node;
        const int b = seq.tasks[l].node;
        if (a == b)
            continue;
        const double leg = skim.d(a, b);
        if (!std::isfinite(leg))
            throw ValidationError("level OD (" + std::to_string(a) + "," + std::to_string(b) + ") unreachable");
        route += leg;
    }
    if (!std::isfinite(solo))
        throw ValidationError("unreachable OD in sequence " + seq.label());
    return solo - route;
}

std::vector<MatchingSequence> build_sequence_pool(const std::vector<OD>& driver_ods,
                                                  const std::vector<OD>& passenger_ods, const PoolOptions& opt,
                                                  const SkimMatrix& skim)
{
    std::vector<MatchingSequence> pool;
    std::vector<OD> drivers = driver_ods;
    std::sort(drivers.begin(), drivers.end());
    for (const OD& drv : drivers) {
        std::vector<OD> cands;
        for (const OD& p : passenger_ods) {
            // A passenger is only worth considering when serving them alone fits the detour budget.
            const double direct = skim.t(drv.o, p.o) + skim.t(p.o, p.d) + skim.t(p.d, drv.d);
            if (direct <= opt.generation.detour_factor * skim.t(drv.o, drv.d) + 1e-9)
                cands.push_back(p);
        }
        if (opt.max_candidate_passengers > 0 && static_cast<int>(cands.size()) > opt.max_candidate_passengers) {
            std::stable_sort(cands.begin(), cands.end(), [&](const OD& a, const OD& b) {
                const double ea = skim.t(drv.o, a.o) + skim.t(a.o, a.d) + skim.t(a.d, drv.d) - skim.t(a.o, a.d);
                const double eb = skim.t(drv.o, b.o) + skim.t(b.o, b.d) + skim.t(b.d, drv.d) - skim.t(b.o, b.d);
                return ea < eb;
            });
            cands.resize(opt.max_candidate_passengers);
        }
        std::vector<MatchingSequence> mine;
        for (auto& grp : enumerate_groups(drv, cands, opt.generation, skim)) {
            for (auto& s : grp.sequences) {
                if (s.is_solo())
                    continue;
                if (opt.require_positive_saving && !(s.R > 1e-9))
                    continue;
                mine.push_back(std::move(s));
            }
        }
        if (opt.max_sequences_per_driver > 0 && static_cast<int>(mine.size()) > opt.max_sequences_per_driver) {
            std::stable_sort(mine.begin(), mine.end(),
                             [](const MatchingSequence& a, const MatchingSequence& b) { return a.R > b.R; });
            mine.resize(opt.max_sequences_per_driver);
        }
        for (auto& s : mine) {
            s.id = static_cast<int>(pool.size());
            pool.push_back(std::move(s));
        }
    }
    return pool;
}

void write_sequence_dump(std::ostream& out, const std::vector<MatchingSequence>& seqs)
{
    for (const auto& s : seqs) {
        nlohmann::json j;
        j["id"] = s.id;
        j["driver"] = {s.driver.o, s.driver.d};
        nlohmann::json tasks = nlohmann::json::array();
        for (const auto& t : s.tasks)
            tasks.push_back({{"kind", task_kind_name(t.kind)}, {"node", t.node}, {"od", {t.od.o, t.od.d}}});
        j["tasks"] = tasks;
        j["R"] = s.R;
        out << j.dump() << '\n';
    }
}

std::vector<MatchingSequence> read_sequence_dump(std::istream& in)
{
    std::vector<MatchingSequence> seqs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            MatchingSequence s;
            s.id = j.at("id").get<int>();
            s.driver = {j.at("driver").at(0).get<int>(), j.at("driver").at(1).get<int>()};
            for (const auto& t : j.at("tasks")) {
                Task task;
                const auto kind = t.at("kind").get<std::string>();
                if (kind == "depart")
                    task.kind = TaskKind::DriverDepart;
                else if (kind == "arrive")
                    task.kind = TaskKind::DriverArrive;
                else if (kind == "pickup")
                    task.kind = TaskKind::Pickup;
                else if (kind == "dropoff")
                    task.kind = TaskKind::Dropoff;
                else
                    throw ParseError("unknown task kind '" + kind + "'", lineno);
                task.node = t.at("node").get<int>();
                task.od = {t.at("od").at(0).get<int>(), t.at("od").at(1).get<int>()};
                s.tasks.push_back(task);
            }
            refresh_sequence(s, nullptr);
            s.R = j.value("R", 0.0);
            seqs.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return seqs;
}

} // namespace seqbush
