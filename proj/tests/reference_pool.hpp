#pragma once

// Independent enumeration of matching sequences by brute-force interleaving, keyed by passenger set
// and task order, and the same key set extracted from the generator.

#include "seqbush/matchgen.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace seqbush::testing {

// Reference enumeration: every ordering of pickups and drop-offs, filtered by precedence, capacity and
// the driver's time budget, with duplicate task lists removed. Groups follow the subgroup rule.
using Key = std::pair<std::vector<OD>, std::string>;

inline std::set<std::string> orderings(const OD& driver, const std::vector<OD>& members, int cap, double detour,
                                       const SkimMatrix& sk)
{
    const int k = static_cast<int>(members.size());
    std::vector<int> events(2 * k);
    std::iota(events.begin(), events.end(), 0); // 2i pickup of i, 2i+1 drop-off of i
    std::set<std::string> out;
    const double budget = detour * sk.t(driver.o, driver.d);
    do {
        std::vector<int> seen(k, 0);
        int onboard = 0;
        bool ok = true;
        std::vector<int> nodes{driver.o};
        std::ostringstream key;
        for (int e : events) {
            const int i = e / 2;
            if (e % 2 == 0) {
                ok = ok && seen[i] == 0 && ++onboard <= cap;
                seen[i] = 1;
                nodes.push_back(members[i].o);
                key << "p" << members[i].o << "-" << members[i].d << ";";
            } else {
                ok = ok && seen[i] == 1;
                --onboard;
                seen[i] = 2;
                nodes.push_back(members[i].d);
                key << "d" << members[i].o << "-" << members[i].d << ";";
            }
        }
        nodes.push_back(driver.d);
        double t = 0.0;
        for (std::size_t j = 1; j < nodes.size(); ++j)
            t += nodes[j - 1] == nodes[j] ? 0.0 : sk.t(nodes[j - 1], nodes[j]);
        if (ok && t <= budget + 1e-9)
            out.insert(key.str());
    } while (std::next_permutation(events.begin(), events.end()));
    return out;
}

inline std::set<Key> reference_pool(const OD& driver, std::vector<OD> cands, int cap, int max_p, double detour,
                                    const SkimMatrix& sk)
{
    std::sort(cands.begin(), cands.end());
    std::set<Key> out;
    std::set<std::vector<OD>> feasible{{}};
    std::vector<std::vector<OD>> frontier{{}};
    for (int size = 1; size <= (cap > 0 ? max_p : 0); ++size) {
        std::vector<std::vector<OD>> next;
        std::set<std::vector<OD>> now;
        for (const auto& base : frontier)
            for (const OD& c : cands) {
                if (!base.empty() && c < base.back())
                    continue;
                auto members = base;
                members.push_back(c);
                bool subs = true;
                for (std::size_t j = 0; j < members.size(); ++j) {
                    auto sub = members;
                    sub.erase(sub.begin() + static_cast<long>(j));
                    subs = subs && feasible.count(sub);
                }
                if (!subs)
                    continue;
                const auto ords = orderings(driver, members, cap, detour, sk);
                if (ords.empty())
                    continue;
                now.insert(members);
                next.push_back(members);
                for (const auto& o : ords)
                    out.insert({members, o});
            }
        feasible = now;
        frontier = next;
    }
    return out;
}

inline std::set<Key> generated_pool(const OD& driver, const std::vector<OD>& cands, const GenerationOptions& opt,
                                    const SkimMatrix& sk)
{
    std::set<Key> out;
    for (const auto& g : enumerate_groups(driver, cands, opt, sk))
        for (const auto& s : g.sequences) {
            if (s.is_solo())
                continue;
            std::ostringstream key;
            for (const Task& t : s.tasks)
                if (t.kind == TaskKind::Pickup || t.kind == TaskKind::Dropoff)
                    key << (t.kind == TaskKind::Pickup ? "p" : "d") << t.od.o << "-" << t.od.d << ";";
            auto members = g.passengers;
            std::sort(members.begin(), members.end());
            out.insert({members, key.str()});
        }
    return out;
}

} // namespace seqbush::testing
