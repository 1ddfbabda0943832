#include "seqbush/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace seqbush::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pos(double v) { return v > 0.0 ? v : 0.0; }

double path_cost(const Path& p, const std::vector<double>& c)
{
    double s = 0.0;
    for (int a : p)
        s += c[a];
    return s;
}

std::size_t argmin_path(const std::vector<Path>& paths, const std::vector<double>& c)
{
    std::size_t best = 0;
    double bc = kInf;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const double v = path_cost(paths[k], c);
        if (v < bc) {
            bc = v;
            best = k;
        }
    }
    return best;
}

// Per-class link costs of the base network for a given vehicle loading, computed directly from the
// cost model.
struct ClassCosts {
    std::vector<double> time, da, pt;
    std::vector<std::vector<double>> layer; // by onboard count

    ClassCosts(const Network& net, const CostModel& model, const std::vector<double>& x, int max_onboard)
    {
        const int m = net.link_count();
        time.resize(m);
        da.resize(m);
        pt.resize(m);
        layer.assign(max_onboard + 1, std::vector<double>(m));
        for (int a = 0; a < m; ++a) {
            const Link& l = net.links[a];
            const double t = link_travel_time(l, x[a]);
            time[a] = t;
            da[a] = class_link_cost(l, LinkClass::DA, t, model);
            pt[a] = class_link_cost(l, LinkClass::PT, t, model);
            const double rp = class_link_cost(l, LinkClass::RP, t, model);
            layer[0][a] = class_link_cost(l, LinkClass::RDEmpty, t, model);
            const double loaded = class_link_cost(l, LinkClass::RDLoaded, t, model);
            for (int k = 1; k <= max_onboard; ++k)
                layer[k][a] = loaded + k * rp;
        }
    }
};

double rational_tol(double cost) { return 1e-9 * (1.0 + std::abs(cost)); }

int max_occupancy(const std::vector<MatchingSequence>& pool)
{
    int k = 0;
    for (const auto& s : pool)
        for (int o : s.occupancy)
            k = std::max(k, o);
    return k;
}

} // namespace

// ---------------------------------------------------------------------------------------------
// Enumeration

std::vector<Path> enumerate_paths(const Network& net, int o, int d, int hop_limit)
{
    require(o >= 1 && o <= net.node_count && d >= 1 && d <= net.node_count, "enumerate_paths: node out of range");
    std::vector<Path> out;
    if (o == d) {
        out.push_back({});
        return out;
    }
    std::vector<char> on_path(net.node_count + 1, 0);
    Path cur;
    std::function<void(int)> dfs = [&](int u) {
        if (u == d) {
            out.push_back(cur);
            return;
        }
        if (static_cast<int>(cur.size()) >= hop_limit)
            return;
        if (u != o && !net.is_thru(u))
            return;
        for (int a : net.out_links[u]) {
            const int v = net.links[a].head;
            if (on_path[v])
                continue;
            on_path[v] = 1;
            cur.push_back(a);
            dfs(v);
            cur.pop_back();
            on_path[v] = 0;
        }
    };
    on_path[o] = 1;
    dfs(o);
    return out;
}

double SequenceRouteSet::count() const
{
    double c = 1.0;
    for (const auto& lp : level_paths)
        c *= static_cast<double>(lp.size());
    return level_paths.empty() ? 0.0 : c;
}

namespace {

SequenceRouteSet level_path_sets(const MatchingSequence& seq, const Network& net, int hop_limit)
{
    SequenceRouteSet rs;
    for (int l = 1; l <= seq.level_count(); ++l) {
        auto paths = enumerate_paths(net, seq.tasks[l - 1].node, seq.tasks[l].node, hop_limit);
        if (paths.empty())
            throw ValidationError("level " + std::to_string(l) + " of sequence " + seq.label()
                                  + " has no path within " + std::to_string(hop_limit) + " links");
        rs.level_paths.push_back(std::move(paths));
    }
    return rs;
}

} // namespace

SequenceRouteSet enumerate_sequence_routes(const MatchingSequence& seq, const Network& net, int hop_limit,
                                           double budget)
{
    SequenceRouteSet rs = level_path_sets(seq, net, hop_limit);
    const double total = rs.count();
    if (total > budget)
        throw EnumerationBudgetExceeded("sequence " + seq.label() + " has " + std::to_string(total)
                                            + " routes, above the budget of " + std::to_string(budget),
                                        total);
    const int L = static_cast<int>(rs.level_paths.size());
    if (L == 0)
        return rs;
    std::vector<int> idx(L, 0);
    for (;;) {
        rs.routes.push_back(idx);
        int k = L - 1;
        while (k >= 0 && ++idx[k] == static_cast<int>(rs.level_paths[k].size())) {
            idx[k] = 0;
            --k;
        }
        if (k < 0)
            break;
    }
    return rs;
}

// ---------------------------------------------------------------------------------------------
// Linear programming

namespace {

class Tableau {
public:
    Tableau(int rows, int cols) : a_(rows, std::vector<double>(cols + 1, 0.0)), basis_(rows, -1), cols_(cols) {}

    double& at(int r, int c) { return a_[r][c]; }
    double& rhs(int r) { return a_[r][cols_]; }
    double rhs(int r) const { return a_[r][cols_]; }
    int rows() const { return static_cast<int>(a_.size()); }
    int cols() const { return cols_; }
    std::vector<int>& basis() { return basis_; }

    void pivot(int r, int c)
    {
        const double p = a_[r][c];
        for (double& v : a_[r])
            v /= p;
        for (int i = 0; i < rows(); ++i) {
            if (i == r || a_[i][c] == 0.0)
                continue;
            const double f = a_[i][c];
            for (int j = 0; j <= cols_; ++j)
                a_[i][j] -= f * a_[r][j];
        }
        basis_[r] = c;
    }

    // Minimizes cost over the current basis. Returns false when unbounded.
    bool run(const std::vector<double>& cost, const std::vector<char>& allowed)
    {
        constexpr double eps = 1e-9;
        for (int guard = 0; guard < 100000; ++guard) {
            int enter = -1;
            for (int j = 0; j < cols_; ++j) {
                if (!allowed[j])
                    continue;
                double rc = cost[j];
                for (int i = 0; i < rows(); ++i)
                    rc -= cost[basis_[i]] * a_[i][j];
                if (rc < -eps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0)
                return true;
            int leave = -1;
            double best = kInf;
            for (int i = 0; i < rows(); ++i) {
                if (a_[i][enter] <= eps)
                    continue;
                const double ratio = rhs(i) / a_[i][enter];
                if (ratio < best - 1e-12 || (ratio <= best + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
            if (leave < 0)
                return false;
            pivot(leave, enter);
        }
        throw ValidationError("solve_lp: iteration limit reached");
    }

    double value(const std::vector<double>& cost) const
    {
        double v = 0.0;
        for (int i = 0; i < static_cast<int>(a_.size()); ++i)
            v += cost[basis_[i]] * rhs(i);
        return v;
    }

private:
    std::vector<std::vector<double>> a_;
    std::vector<int> basis_;
    int cols_;
};

} // namespace

LpResult solve_lp(const LinearProgram& lp)
{
    const int n = static_cast<int>(lp.c.size());
    struct Row {
        std::vector<double> a;
        double b;
        int kind; // 0: <=, 1: =
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < lp.A_le.size(); ++i)
        rows.push_back({lp.A_le[i], lp.b_le[i], 0});
    for (std::size_t i = 0; i < lp.A_eq.size(); ++i)
        rows.push_back({lp.A_eq[i], lp.b_eq[i], 1});
    for (int j = 0; j < n && j < static_cast<int>(lp.upper.size()); ++j) {
        if (lp.upper[j] < 0.0)
            continue;
        std::vector<double> a(n, 0.0);
        a[j] = 1.0;
        rows.push_back({a, lp.upper[j], 0});
    }
    const int m = static_cast<int>(rows.size());
    LpResult res;
    if (m == 0) {
        res.feasible = true;
        res.x.assign(n, 0.0);
        for (double c : lp.c)
            if (c < 0.0)
                res.bounded = false;
        return res;
    }
    // Columns: originals, one slack per inequality, one artificial per row that needs it.
    int n_slack = 0;
    for (const auto& r : rows)
        n_slack += r.kind == 0 ? 1 : 0;
    const int art0 = n + n_slack;
    const int cols = art0 + m;
    Tableau t(m, cols);
    int slack = n;
    for (int i = 0; i < m; ++i) {
        const auto& r = rows[i];
        const double sign = r.b < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j)
            t.at(i, j) = sign * (j < static_cast<int>(r.a.size()) ? r.a[j] : 0.0);
        t.rhs(i) = sign * r.b;
        if (r.kind == 0)
            t.at(i, slack++) = sign;
        t.at(i, art0 + i) = 1.0;
        t.basis()[i] = art0 + i;
        if (r.kind == 0 && sign > 0.0) {
            // The slack is a feasible starting basic variable.
            t.basis()[i] = slack - 1;
            t.at(i, art0 + i) = 0.0;
        }
    }
    std::vector<double> phase1(cols, 0.0);
    for (int i = 0; i < m; ++i)
        if (t.basis()[i] >= art0)
            phase1[art0 + i] = 1.0;
    std::vector<char> allowed(cols, 1);
    for (int i = 0; i < m; ++i)
        if (phase1[art0 + i] == 0.0)
            allowed[art0 + i] = 0;
    t.run(phase1, allowed);
    double scale = 1.0;
    for (const auto& r : rows)
        scale = std::max(scale, std::abs(r.b));
    if (t.value(phase1) > 1e-9 * scale)
        return res;
    res.feasible = true;
    for (int i = 0; i < m; ++i) {
        if (t.basis()[i] < art0)
            continue;
        for (int j = 0; j < art0; ++j) {
            if (std::abs(t.at(i, j)) > 1e-9) {
                t.pivot(i, j);
                break;
            }
        }
    }
    for (int j = art0; j < cols; ++j)
        allowed[j] = 0;
    std::vector<double> cost(cols, 0.0);
    for (int j = 0; j < n; ++j)
        cost[j] = lp.c[j];
    if (!t.run(cost, allowed)) {
        res.bounded = false;
        return res;
    }
    res.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (t.basis()[i] < n)
            res.x[t.basis()[i]] = std::max(0.0, t.rhs(i));
    res.objective = 0.0;
    for (int j = 0; j < n; ++j)
        res.objective += lp.c[j] * res.x[j];
    return res;
}

// ---------------------------------------------------------------------------------------------
// Brute-force equilibrium

namespace {

struct OptionLp {
    std::vector<int> var_driver; // driver OD index per variable
    std::vector<int> var_seq;    // sequence id per variable, -1 for quit
    LinearProgram lp;
};

// Option split of every driver OD between quitting and its sequences, with rider availability and
// per-sequence upper bounds.
OptionLp build_option_lp(const std::vector<OD>& ods, const std::map<OD, int>& index,
                         const std::vector<MatchingSequence>& pool, const std::vector<double>& q_rd,
                         const std::vector<double>& q_rp, const std::vector<double>& upper,
                         const std::vector<double>& quit_cost, const std::vector<double>& seq_cost)
{
    OptionLp o;
    std::vector<int> has_seq(ods.size(), 0);
    for (const auto& s : pool)
        has_seq[index.at(s.driver)] = 1;
    std::vector<int> quit_var(ods.size(), -1);
    for (std::size_t i = 0; i < ods.size(); ++i) {
        if (!has_seq[i])
            continue;
        quit_var[i] = static_cast<int>(o.var_seq.size());
        o.var_driver.push_back(static_cast<int>(i));
        o.var_seq.push_back(-1);
        o.lp.c.push_back(quit_cost[i]);
        o.lp.upper.push_back(-1.0);
    }
    std::vector<int> seq_var(pool.size(), -1);
    for (const auto& s : pool) {
        seq_var[s.id] = static_cast<int>(o.var_seq.size());
        o.var_driver.push_back(index.at(s.driver));
        o.var_seq.push_back(s.id);
        o.lp.c.push_back(seq_cost[s.id]);
        o.lp.upper.push_back(std::max(0.0, upper[s.id]));
    }
    const int nv = static_cast<int>(o.var_seq.size());
    for (std::size_t i = 0; i < ods.size(); ++i) {
        if (!has_seq[i])
            continue;
        std::vector<double> row(nv, 0.0);
        for (int v = 0; v < nv; ++v)
            if (o.var_driver[v] == static_cast<int>(i))
                row[v] = 1.0;
        o.lp.A_eq.push_back(row);
        o.lp.b_eq.push_back(q_rd[i]);
    }
    std::map<int, std::vector<double>> rider_rows;
    for (const auto& s : pool)
        for (const auto& [od, c] : s.passenger_groups()) {
            auto& row = rider_rows[index.at(od)];
            row.resize(nv, 0.0);
            row[seq_var[s.id]] += c;
        }
    for (auto& [pi, row] : rider_rows) {
        o.lp.A_le.push_back(row);
        o.lp.b_le.push_back(q_rp[pi]);
    }
    return o;
}

struct ODSet {
    std::vector<OD> ods;
    std::map<OD, int> index;

    void add(const OD& od)
    {
        if (!index.count(od)) {
            index[od] = static_cast<int>(ods.size());
            ods.push_back(od);
        }
    }
};

} // namespace

BruteForceResult brute_force_equilibrium(const Instance& inst, const BruteForceOptions& opt)
{
    require(inst.net != nullptr, "brute_force_equilibrium: network missing");
    require(inst.Z.size() == inst.pool.size(), "brute_force_equilibrium: Z size mismatch");
    const Network& net = *inst.net;
    const auto& pool = inst.pool;
    const int m = net.link_count();

    ODSet set;
    for (const auto& [od, q] : inst.demand.entries)
        set.add(od);
    for (const auto& s : pool) {
        set.add(s.driver);
        for (const auto& pv : s.passengers)
            set.add(pv.od);
    }
    const auto& ods = set.ods;
    const std::size_t W = ods.size();
    std::vector<ModalValues> q(W, ModalValues{});
    double total = 0.0;
    for (std::size_t i = 0; i < W; ++i) {
        if (auto it = inst.demand.entries.find(ods[i]); it != inst.demand.entries.end())
            q[i] = it->second;
        for (double v : q[i])
            total += v;
    }
    std::vector<double> q_rd(W), q_rp(W);
    for (std::size_t i = 0; i < W; ++i) {
        q_rd[i] = q[i][static_cast<int>(Mode::RD)];
        q_rp[i] = q[i][static_cast<int>(Mode::RP)];
    }

    BruteForceResult res;
    SolutionFlows& out = res.flows;
    out.F.assign(pool.size(), 0.0);
    out.Z = inst.Z;
    out.mu.assign(pool.size(), 0.0);
    out.level_flows.assign(pool.size(), {});
    for (std::size_t i = 0; i < W; ++i) {
        ODFlows f;
        f.q = q[i];
        f.demand = std::accumulate(q[i].begin(), q[i].end(), 0.0);
        f.quit_rd = q_rd[i];
        f.quit_rp = q_rp[i];
        out.od[ods[i]] = f;
    }
    if (total <= 0.0) {
        res.converged = true;
        return res;
    }

    // Enumerated choice sets.
    std::vector<std::vector<Path>> od_paths(W);
    for (std::size_t i = 0; i < W; ++i) {
        od_paths[i] = enumerate_paths(net, ods[i].o, ods[i].d, opt.hop_limit);
        if (od_paths[i].empty())
            throw ValidationError("OD " + to_string(ods[i]) + " has no path within the hop limit");
    }
    std::vector<SequenceRouteSet> seq_routes;
    // Level flows are averaged per level, so the work grows with the level path count rather than
    // with the number of full routes.
    for (const auto& s : pool) {
        seq_routes.push_back(level_path_sets(s, net, opt.hop_limit));
        double paths = 0.0;
        for (const auto& lp : seq_routes.back().level_paths)
            paths += static_cast<double>(lp.size());
        if (paths > opt.route_budget)
            throw EnumerationBudgetExceeded("sequence " + s.label() + " has " + std::to_string(paths)
                                                + " level paths, above the budget of "
                                                + std::to_string(opt.route_budget),
                                            paths);
    }
    const int kmax = std::max(1, max_occupancy(pool));

    // Iterate: path flows per OD (DA / PT), per level, and the option split.
    std::vector<std::vector<double>> da(W), pt(W);
    for (std::size_t i = 0; i < W; ++i) {
        da[i].assign(od_paths[i].size(), 0.0);
        pt[i].assign(od_paths[i].size(), 0.0);
    }
    std::vector<std::vector<std::vector<double>>> lv(pool.size());
    for (const auto& s : pool)
        for (int l = 0; l < s.level_count(); ++l)
            lv[s.id].push_back(std::vector<double>(seq_routes[s.id].level_paths[l].size(), 0.0));
    std::vector<double> y(pool.size(), 0.0);

    auto load = [&]() {
        std::vector<double> x(m, 0.0);
        for (std::size_t i = 0; i < W; ++i)
            for (std::size_t k = 0; k < da[i].size(); ++k)
                for (int a : od_paths[i][k])
                    x[a] += da[i][k];
        for (const auto& s : pool)
            for (int l = 0; l < s.level_count(); ++l)
                for (std::size_t k = 0; k < lv[s.id][l].size(); ++k)
                    for (int a : seq_routes[s.id].level_paths[l][k])
                        x[a] += lv[s.id][l][k];
        return x;
    };
    auto pt_cost_vector = [&](const ClassCosts& cc) {
        std::vector<double> c(m);
        for (int a = 0; a < m; ++a)
            c[a] = class_link_cost(net.links[a], LinkClass::PT, inst.model.pt_link_time(net.links[a], cc.time[a]),
                                   inst.model);
        return c;
    };

    // A sequence may take flow only when nobody in it would rather quit.
    auto rational = [&](const MatchingSequence& s, const std::vector<std::size_t>& choice, const ClassCosts& cc,
                        const std::vector<double>& c_da, const std::vector<double>& c_pt) {
        double rd = 0.0;
        std::vector<double> rider(s.passengers.size(), 0.0);
        for (int l = 0; l < s.level_count(); ++l) {
            const LinkClass rdc = s.onboard(l + 1) > 0 ? LinkClass::RDLoaded : LinkClass::RDEmpty;
            double rp = 0.0;
            for (int a : seq_routes[s.id].level_paths[l][choice[l]]) {
                rd += class_link_cost(net.links[a], rdc, cc.time[a], inst.model);
                rp += class_link_cost(net.links[a], LinkClass::RP, cc.time[a], inst.model);
            }
            for (std::size_t p = 0; p < s.passengers.size(); ++p)
                if (s.passengers[p].pickup <= l && l < s.passengers[p].dropoff)
                    rider[p] += rp;
        }
        if (rd > c_da[set.index.at(s.driver)] + rational_tol(c_da[set.index.at(s.driver)]))
            return false;
        for (std::size_t p = 0; p < s.passengers.size(); ++p) {
            const double alt = c_pt[set.index.at(s.passengers[p].od)];
            if (rider[p] > alt + rational_tol(alt))
                return false;
        }
        return true;
    };

    struct Target {
        std::vector<std::vector<double>> da, pt;
        std::vector<std::vector<std::vector<double>>> lv;
        std::vector<double> y;
        double residual = 0.0;
    };
    auto best_response = [&]() {
        const auto x = load();
        const ClassCosts cc(net, inst.model, x, kmax);
        const auto ptc = pt_cost_vector(cc);
        Target t;
        t.da.resize(W);
        t.pt.resize(W);
        t.lv.resize(pool.size());
        t.y.assign(pool.size(), 0.0);
        std::vector<double> c_da(W), c_pt(W);
        std::vector<std::size_t> b_da(W), b_pt(W);
        for (std::size_t i = 0; i < W; ++i) {
            b_da[i] = argmin_path(od_paths[i], cc.da);
            b_pt[i] = argmin_path(od_paths[i], ptc);
            c_da[i] = path_cost(od_paths[i][b_da[i]], cc.da);
            c_pt[i] = path_cost(od_paths[i][b_pt[i]], ptc);
        }
        std::vector<double> g(pool.size(), 0.0);
        std::vector<double> quota = inst.Z;
        std::vector<std::vector<std::size_t>> b_lv(pool.size());
        double gap = 0.0;
        for (const auto& s : pool) {
            double bundle = 0.0;
            for (int l = 0; l < s.level_count(); ++l) {
                const auto& paths = seq_routes[s.id].level_paths[l];
                const auto& c = cc.layer[s.onboard(l + 1)];
                const std::size_t b = argmin_path(paths, c);
                b_lv[s.id].push_back(b);
                const double best = path_cost(paths[b], c);
                bundle += best;
                for (std::size_t k = 0; k < paths.size(); ++k)
                    gap += lv[s.id][l][k] * (path_cost(paths[k], c) - best);
            }
            double pt_alt = 0.0;
            for (const auto& [od, cnt] : s.passenger_groups())
                pt_alt += cnt * c_pt[set.index.at(od)];
            g[s.id] = bundle - pt_alt;
            if (!rational(s, b_lv[s.id], cc, c_da, c_pt))
                quota[s.id] = 0.0;
        }
        auto olp = build_option_lp(ods, set.index, pool, q_rd, q_rp, quota, c_da, g);
        const LpResult lr = solve_lp(olp.lp);
        if (!lr.feasible)
            throw ValidationError("brute_force_equilibrium: option split infeasible");
        double current = 0.0;
        for (std::size_t v = 0; v < olp.var_seq.size(); ++v) {
            const int n = olp.var_seq[v];
            if (n >= 0) {
                t.y[n] = lr.x[v];
                current += g[n] * y[n];
            } else {
                double matched = 0.0;
                for (const auto& s : pool)
                    if (set.index.at(s.driver) == olp.var_driver[v])
                        matched += y[s.id];
                current += c_da[olp.var_driver[v]] * (q_rd[olp.var_driver[v]] - matched);
            }
        }
        gap += pos(current - lr.objective);
        std::vector<double> quit_rd = q_rd, quit_rp = q_rp;
        for (const auto& s : pool) {
            quit_rd[set.index.at(s.driver)] -= t.y[s.id];
            for (const auto& [od, cnt] : s.passenger_groups())
                quit_rp[set.index.at(od)] -= cnt * t.y[s.id];
        }
        double mean_cost = 0.0;
        for (std::size_t i = 0; i < W; ++i) {
            t.da[i].assign(od_paths[i].size(), 0.0);
            t.pt[i].assign(od_paths[i].size(), 0.0);
            t.da[i][b_da[i]] = q[i][0] + pos(quit_rd[i]);
            t.pt[i][b_pt[i]] = q[i][3] + pos(quit_rp[i]);
            for (std::size_t k = 0; k < od_paths[i].size(); ++k) {
                gap += da[i][k] * (path_cost(od_paths[i][k], cc.da) - c_da[i]);
                gap += pt[i][k] * (path_cost(od_paths[i][k], ptc) - c_pt[i]);
            }
            mean_cost += c_da[i];
        }
        mean_cost = std::max(mean_cost / static_cast<double>(W), 1e-12);
        for (const auto& s : pool) {
            for (int l = 0; l < s.level_count(); ++l) {
                std::vector<double> v(seq_routes[s.id].level_paths[l].size(), 0.0);
                v[b_lv[s.id][l]] = t.y[s.id];
                t.lv[s.id].push_back(std::move(v));
            }
        }
        t.residual = gap / (total * mean_cost);
        return t;
    };

    auto blend = [](std::vector<double>& cur, const std::vector<double>& tgt, double w) {
        for (std::size_t k = 0; k < cur.size(); ++k)
            cur[k] += w * (tgt[k] - cur[k]);
    };
    for (int it = 0; it < opt.max_iterations; ++it) {
        Target t = best_response();
        res.iterations = it;
        res.residual = t.residual;
        if (it > 0 && it >= opt.min_iterations && t.residual <= opt.tolerance) {
            res.converged = true;
            break;
        }
        const double w = 1.0 / (it + 1.0);
        for (std::size_t i = 0; i < W; ++i) {
            blend(da[i], t.da[i], w);
            blend(pt[i], t.pt[i], w);
        }
        for (const auto& s : pool)
            for (int l = 0; l < s.level_count(); ++l)
                blend(lv[s.id][l], t.lv[s.id][l], w);
        blend(y, t.y, w);
    }

    // Export in the shared solution format.
    for (const auto& s : pool) {
        out.F[s.id] = y[s.id];
        auto& od = out.od[s.driver];
        od.quit_rd -= y[s.id];
        for (const auto& [p, cnt] : s.passenger_groups())
            out.od[p].quit_rp -= cnt * y[s.id];
        out.level_flows[s.id].assign(s.level_count(), {});
        for (int l = 0; l < s.level_count(); ++l) {
            if (s.tasks[l].node == s.tasks[l + 1].node || y[s.id] <= 0.0)
                continue;
            auto& f = out.level_flows[s.id][l];
            f.assign(m, 0.0);
            for (std::size_t k = 0; k < lv[s.id][l].size(); ++k)
                for (int a : seq_routes[s.id].level_paths[l][k])
                    f[a] += lv[s.id][l][k];
        }
    }
    for (auto& [od, f] : out.od) {
        f.quit_rd = pos(f.quit_rd);
        f.quit_rp = pos(f.quit_rp);
    }
    for (std::size_t i = 0; i < W; ++i) {
        auto& fda = out.da_flows[ods[i].o];
        auto& fpt = out.pt_flows[ods[i].o];
        fda.resize(m, 0.0);
        fpt.resize(m, 0.0);
        for (std::size_t k = 0; k < od_paths[i].size(); ++k)
            for (int a : od_paths[i][k]) {
                fda[a] += da[i][k];
                fpt[a] += pt[i][k];
            }
    }
    return res;
}

// ---------------------------------------------------------------------------------------------
// Residual checks

double ResidualReport::max_violation() const
{
    double v = 0.0;
    for (const auto& f : families)
        if (f.checked)
            v = std::max(v, f.violation);
    return v;
}

bool ResidualReport::passes(double tol) const { return max_violation() <= tol; }

const Residual* ResidualReport::find(const std::string& family) const
{
    for (const auto& f : families)
        if (f.family == family)
            return &f;
    return nullptr;
}

std::string ResidualReport::to_text() const
{
    std::ostringstream os;
    for (const auto& f : families) {
        os << f.family << ": ";
        if (!f.checked)
            os << "skipped";
        else
            os << f.violation;
        if (!f.witness.empty())
            os << " (" << f.witness << ")";
        os << "\n";
    }
    return os.str();
}

namespace {

struct Worst {
    double value = 0.0;
    std::string witness;
    void offer(double v, const std::function<std::string()>& what)
    {
        if (v > value) {
            value = v;
            witness = what();
        }
    }
};

// Node imbalance of a link flow vector against expected net outflows.
double balance_violation(const Network& net, const std::vector<double>& f, const std::map<int, double>& supply,
                         int* node)
{
    std::vector<double> bal(net.node_count + 1, 0.0);
    for (int a = 0; a < net.link_count() && a < static_cast<int>(f.size()); ++a) {
        bal[net.links[a].tail] += f[a];
        bal[net.links[a].head] -= f[a];
    }
    for (auto& [v, s] : supply)
        bal[v] -= s;
    double worst = 0.0;
    for (int v = 1; v <= net.node_count; ++v)
        if (std::abs(bal[v]) > worst) {
            worst = std::abs(bal[v]);
            if (node)
                *node = v;
        }
    for (double v : f)
        if (v < 0.0)
            worst = std::max(worst, -v);
    return worst;
}

bool has_positive_cycle(const Network& net, const std::vector<double>& f, double thr)
{
    const int n = net.node_count;
    std::vector<int> color(n + 1, 0);
    std::function<bool(int)> dfs = [&](int u) {
        color[u] = 1;
        for (int a : net.out_links[u]) {
            if (a >= static_cast<int>(f.size()) || f[a] <= thr)
                continue;
            const int v = net.links[a].head;
            if (color[v] == 1)
                return true;
            if (color[v] == 0 && dfs(v))
                return true;
        }
        color[u] = 2;
        return false;
    };
    for (int v = 1; v <= n; ++v)
        if (color[v] == 0 && dfs(v))
            return true;
    return false;
}

double reduced_cost_sum(const Network& net, const std::vector<double>& f, const std::vector<double>& c, int root,
                        int* witness)
{
    const auto tree = dijkstra(net, root, c);
    double s = 0.0, worst = 0.0;
    for (int a = 0; a < net.link_count() && a < static_cast<int>(f.size()); ++a) {
        if (f[a] <= 0.0)
            continue;
        const auto& l = net.links[a];
        const double rc = std::isfinite(tree.dist[l.tail]) ? tree.dist[l.tail] + c[a] - tree.dist[l.head] : 0.0;
        s += f[a] * pos(rc);
        if (f[a] * rc > worst) {
            worst = f[a] * rc;
            if (witness)
                *witness = a;
        }
    }
    return s;
}

std::string link_name(const Network& net, int a)
{
    if (a < 0)
        return "";
    return "link " + std::to_string(net.links[a].tail) + "->" + std::to_string(net.links[a].head);
}

} // namespace

ResidualReport verify_solution(const VerifyInput& in)
{
    require(in.net && in.pool && in.flows, "verify_solution: incomplete input");
    const Network& net = *in.net;
    const auto& pool = *in.pool;
    const SolutionFlows& sol = *in.flows;
    const int m = net.link_count();
    require(sol.F.size() == pool.size() && sol.Z.size() == pool.size(), "verify_solution: flow size mismatch");

    ResidualReport rep;
    const double total = sol.total_demand();
    if (total <= 0.0) {
        for (const char* fam : {"conservation", "coupling", "transfer_avoidance", "capacity", "stability", "wardrop",
                                "mode_complementarity", "cycles", "platform"})
            rep.families.push_back({fam, 0.0, "", true});
        return rep;
    }
    const double flow_thr = 1e-9 * total;

    const auto x = sol.vehicle_flows(m);
    const ClassCosts cc(net, in.model, x, std::max(in.capacity, max_occupancy(pool)));
    std::vector<double> ptc(m);
    for (int a = 0; a < m; ++a)
        ptc[a] = class_link_cost(net.links[a], LinkClass::PT, in.model.pt_link_time(net.links[a], cc.time[a]),
                                 in.model);

    std::map<OD, double> c_da, c_pt;
    std::map<int, ShortestPathTree> da_tree, pt_tree;
    double mean_cost = 0.0;
    for (const auto& [od, f] : sol.od) {
        if (!da_tree.count(od.o)) {
            da_tree.emplace(od.o, dijkstra(net, od.o, cc.da));
            pt_tree.emplace(od.o, dijkstra(net, od.o, ptc));
        }
        c_da[od] = da_tree.at(od.o).dist[od.d];
        c_pt[od] = pt_tree.at(od.o).dist[od.d];
        mean_cost += c_da[od];
    }
    mean_cost = std::max(mean_cost / static_cast<double>(sol.od.size()), 1e-12);
    const double cost_scale = total * mean_cost;

    // Conservation: modal split, quit bookkeeping and origin-based node balances.
    {
        Worst w;
        std::map<OD, double> drivers, riders;
        for (const auto& s : pool) {
            drivers[s.driver] += sol.F[s.id];
            for (const auto& [od, c] : s.passenger_groups())
                riders[od] += c * sol.F[s.id];
        }
        std::map<int, std::map<int, double>> da_supply, pt_supply;
        for (const auto& [od, f] : sol.od) {
            const double sum = std::accumulate(f.q.begin(), f.q.end(), 0.0);
            w.offer(std::abs(sum - f.demand), [&] { return "modal split of " + to_string(od); });
            for (double v : f.q)
                w.offer(-v, [&] { return "negative modal demand at " + to_string(od); });
            w.offer(std::abs(f.q[1] - drivers[od] - f.quit_rd), [&] { return "driver balance of " + to_string(od); });
            w.offer(std::abs(f.q[2] - riders[od] - f.quit_rp), [&] { return "rider balance of " + to_string(od); });
            w.offer(-f.quit_rd, [&] { return "negative quit at " + to_string(od); });
            w.offer(-f.quit_rp, [&] { return "negative quit at " + to_string(od); });
            const double dda = f.q[0] + f.quit_rd;
            const double dpt = f.q[3] + f.quit_rp;
            da_supply[od.o][od.o] += dda;
            da_supply[od.o][od.d] -= dda;
            pt_supply[od.o][od.o] += dpt;
            pt_supply[od.o][od.d] -= dpt;
        }
        for (auto& [o, sup] : da_supply) {
            static const std::vector<double> none;
            auto it = sol.da_flows.find(o);
            int node = 0;
            const double v = balance_violation(net, it == sol.da_flows.end() ? none : it->second, sup, &node);
            w.offer(v, [&] { return "DA flows from " + std::to_string(o) + " at node " + std::to_string(node); });
        }
        for (auto& [o, sup] : pt_supply) {
            static const std::vector<double> none;
            auto it = sol.pt_flows.find(o);
            int node = 0;
            const double v = balance_violation(net, it == sol.pt_flows.end() ? none : it->second, sup, &node);
            w.offer(v, [&] { return "PT flows from " + std::to_string(o) + " at node " + std::to_string(node); });
        }
        rep.families.push_back({"conservation", w.value / total, w.witness, true});
    }

    // Coupling: every level of a sequence carries exactly its sequence flow between its tasks.
    {
        Worst w;
        for (const auto& s : pool) {
            w.offer(-sol.F[s.id], [&] { return "negative flow on " + s.label(); });
            for (int l = 1; l <= s.level_count(); ++l) {
                const int o = s.tasks[l - 1].node, d = s.tasks[l].node;
                if (o == d)
                    continue;
                const std::vector<double>* f = nullptr;
                if (s.id < static_cast<int>(sol.level_flows.size()) && l - 1 < static_cast<int>(sol.level_flows[s.id].size()))
                    f = &sol.level_flows[s.id][l - 1];
                if (!f || f->empty()) {
                    w.offer(sol.F[s.id], [&] { return s.label() + " level " + std::to_string(l) + " has no flow"; });
                    continue;
                }
                int node = 0;
                const double v = balance_violation(net, *f, {{o, sol.F[s.id]}, {d, -sol.F[s.id]}}, &node);
                w.offer(v, [&] { return s.label() + " level " + std::to_string(l) + " at node " + std::to_string(node); });
            }
        }
        rep.families.push_back({"coupling", w.value / total, w.witness, true});
    }

    // Transfer avoidance: each served passenger rides one vehicle from pickup to drop-off.
    {
        Worst w;
        for (const auto& s : pool) {
            bool ok = s.tasks.size() >= 2 && s.tasks.front().node == s.driver.o && s.tasks.back().node == s.driver.d;
            for (const auto& pv : s.passengers) {
                ok = ok && pv.pickup > 0 && pv.pickup < pv.dropoff && pv.dropoff < s.level_count()
                    && s.tasks[pv.pickup].node == pv.od.o && s.tasks[pv.dropoff].node == pv.od.d;
            }
            OccupancyProfile prof;
            try {
                prof = occupancy_profile(s);
            } catch (const ValidationError&) {
                ok = false;
            }
            ok = ok && prof.occupancy == s.occupancy && prof.B == s.B;
            for (int o : s.occupancy)
                ok = ok && o >= 0 && o <= in.capacity;
            if (!ok)
                w.offer(1.0, [&] { return "sequence " + s.label(); });
        }
        rep.families.push_back({"transfer_avoidance", w.value, w.witness, true});
    }

    // Capacity: realized sequence flow within the platform quota.
    {
        Worst w;
        double sum = 0.0;
        for (const auto& s : pool) {
            const double h = pos(sol.F[s.id] - sol.Z[s.id]);
            sum += h;
            w.offer(h, [&] { return "sequence " + s.label(); });
        }
        rep.families.push_back({"capacity", sum / total, w.witness, true});
    }

    // Level min costs from full shortest paths.
    std::vector<double> seq_min(pool.size(), 0.0), seq_avg(pool.size(), 0.0), seq_rd(pool.size(), 0.0);
    std::vector<std::vector<double>> seq_rider(pool.size());
    for (const auto& s : pool) {
        seq_rider[s.id].assign(s.passengers.size(), 0.0);
        for (int l = 1; l <= s.level_count(); ++l) {
            const int o = s.tasks[l - 1].node, d = s.tasks[l].node;
            if (o == d)
                continue;
            const auto& c = cc.layer[s.onboard(l)];
            const auto tree = dijkstra(net, o, c);
            seq_min[s.id] += tree.dist[d];
            const auto path = tree.path_to(net, d);
            const LinkClass rdc = s.onboard(l) > 0 ? LinkClass::RDLoaded : LinkClass::RDEmpty;
            double rp = 0.0;
            for (int a : path) {
                seq_rd[s.id] += class_link_cost(net.links[a], rdc, cc.time[a], in.model);
                rp += class_link_cost(net.links[a], LinkClass::RP, cc.time[a], in.model);
            }
            for (std::size_t p = 0; p < s.passengers.size(); ++p)
                if (s.passengers[p].pickup < l && l <= s.passengers[p].dropoff)
                    seq_rider[s.id][p] += rp;
            if (sol.F[s.id] > 0.0 && s.id < static_cast<int>(sol.level_flows.size())
                && !sol.level_flows[s.id][l - 1].empty()) {
                const auto& f = sol.level_flows[s.id][l - 1];
                double t = 0.0;
                for (int a = 0; a < m; ++a)
                    t += f[a] * c[a];
                seq_avg[s.id] += t / sol.F[s.id];
            } else {
                seq_avg[s.id] += tree.dist[d];
            }
        }
    }
    auto rider_alt = [&](const MatchingSequence& s) {
        double v = 0.0;
        for (const auto& [od, c] : s.passenger_groups())
            v += c * c_pt.at(od);
        return v;
    };
    auto od_flows = [&](const OD& od) -> const ODFlows& { return sol.od.at(od); };
    // Excess of each participant's cost over quitting, summed over the sequence.
    std::vector<double> ir_excess(pool.size(), 0.0);
    for (const auto& s : pool) {
        ir_excess[s.id] = pos(seq_rd[s.id] - c_da.at(s.driver) - rational_tol(c_da.at(s.driver)));
        for (std::size_t p = 0; p < s.passengers.size(); ++p) {
            const double alt = c_pt.at(s.passengers[p].od);
            ir_excess[s.id] += pos(seq_rider[s.id][p] - alt - rational_tol(alt));
        }
    }

    // Stability: no used option admits a feasible strictly cheaper alternative for its group.
    {
        Worst w;
        double pair_sum = 0.0;
        std::map<OD, std::vector<int>> by_driver;
        for (const auto& s : pool)
            by_driver[s.driver].push_back(s.id);
        for (const auto& [drv, seqs] : by_driver) {
            // option -1 is quit
            std::vector<int> options{-1};
            options.insert(options.end(), seqs.begin(), seqs.end());
            auto flow = [&](int n) { return n < 0 ? od_flows(drv).quit_rd : sol.F[n]; };
            auto src_cost = [&](int n) { return n < 0 ? c_da.at(drv) : seq_avg[n] - rider_alt(pool[n]); };
            auto tgt_cost = [&](int n) { return n < 0 ? c_da.at(drv) : seq_min[n] - rider_alt(pool[n]); };
            auto capacity = [&](int s, int t) {
                double cap = flow(s);
                if (t < 0)
                    return cap;
                cap = std::min(cap, pos(sol.Z[t] - sol.F[t]));
                for (const auto& [od, c] : pool[t].passenger_groups()) {
                    const int cs = s < 0 ? 0 : pool[s].passenger_count(od);
                    if (c > cs)
                        cap = std::min(cap, od_flows(od).quit_rp / (c - cs));
                }
                return cap;
            };
            for (int s : options) {
                if (flow(s) <= flow_thr)
                    continue;
                double best = 0.0;
                int best_t = -2;
                for (int t : options) {
                    if (t == s || (t >= 0 && ir_excess[t] > 0.0))
                        continue;
                    const double cap = capacity(s, t);
                    if (cap <= flow_thr)
                        continue;
                    const double v = (src_cost(s) - tgt_cost(t)) * cap;
                    if (v > best) {
                        best = v;
                        best_t = t;
                    }
                }
                pair_sum += best;
                auto name = [&](int n) { return n < 0 ? std::string("quit") : pool[n].label(); };
                w.offer(best / cost_scale,
                        [&] { return "driver " + to_string(drv) + " prefers " + name(best_t) + " over " + name(s); });
            }
        }
        // Global check: the realized option split against the cheapest feasible split.
        ODSet set;
        for (const auto& [od, f] : sol.od)
            set.add(od);
        std::vector<double> q_rd(set.ods.size()), q_rp(set.ods.size()), quit(set.ods.size()), upper(pool.size());
        for (std::size_t i = 0; i < set.ods.size(); ++i) {
            q_rd[i] = od_flows(set.ods[i]).q[1];
            q_rp[i] = od_flows(set.ods[i]).q[2];
            quit[i] = c_da.at(set.ods[i]);
        }
        std::vector<double> g(pool.size());
        for (const auto& s : pool) {
            upper[s.id] = ir_excess[s.id] > 0.0 ? 0.0 : std::max(sol.Z[s.id], sol.F[s.id]);
            g[s.id] = seq_min[s.id] - rider_alt(s);
        }
        double lp_gap = 0.0;
        if (!pool.empty()) {
            const auto olp = build_option_lp(set.ods, set.index, pool, q_rd, q_rp, upper, quit, g);
            const LpResult lr = solve_lp(olp.lp);
            if (lr.feasible) {
                double current = 0.0;
                for (std::size_t v = 0; v < olp.var_seq.size(); ++v) {
                    const int n = olp.var_seq[v];
                    current += n >= 0 ? g[n] * sol.F[n] : quit[olp.var_driver[v]] * od_flows(set.ods[olp.var_driver[v]]).quit_rd;
                }
                lp_gap = pos(current - lr.objective) / cost_scale;
            }
        }
        double ir_sum = 0.0;
        for (const auto& s : pool) {
            if (sol.F[s.id] <= flow_thr || ir_excess[s.id] <= 0.0)
                continue;
            ir_sum += sol.F[s.id] * ir_excess[s.id];
            w.offer(sol.F[s.id] * ir_excess[s.id] / cost_scale,
                    [&] { return s.label() + " leaves a participant worse off than quitting"; });
        }
        std::string wit = w.witness;
        if (lp_gap > w.value && wit.empty())
            wit = "option split above the cheapest feasible split";
        rep.families.push_back(
            {"stability", std::max((pair_sum + ir_sum) / cost_scale, lp_gap), wit, true});
    }

    // Wardrop: flow-weighted reduced costs of every class against its shortest paths.
    {
        double sum = 0.0;
        Worst w;
        for (const auto& [o, f] : sol.da_flows) {
            int a = -1;
            const double v = reduced_cost_sum(net, f, cc.da, o, &a);
            sum += v;
            w.offer(v, [&] { return "DA from " + std::to_string(o) + " " + link_name(net, a); });
        }
        for (const auto& [o, f] : sol.pt_flows) {
            int a = -1;
            const double v = reduced_cost_sum(net, f, ptc, o, &a);
            sum += v;
            w.offer(v, [&] { return "PT from " + std::to_string(o) + " " + link_name(net, a); });
        }
        for (const auto& s : pool) {
            if (s.id >= static_cast<int>(sol.level_flows.size()))
                continue;
            for (int l = 1; l <= s.level_count(); ++l) {
                const auto& f = sol.level_flows[s.id][l - 1];
                if (f.empty())
                    continue;
                int a = -1;
                const double v = reduced_cost_sum(net, f, cc.layer[s.onboard(l)], s.tasks[l - 1].node, &a);
                sum += v;
                w.offer(v, [&] { return s.label() + " level " + std::to_string(l) + " " + link_name(net, a); });
            }
        }
        rep.families.push_back({"wardrop", sum / cost_scale, w.witness, true});
    }

    // Mode complementarity: positive modal demand only on cheapest modes.
    {
        Residual r{"mode_complementarity", 0.0, "", in.endogenous_modes};
        if (in.endogenous_modes) {
            std::map<OD, std::vector<int>> as_driver, as_rider;
            for (const auto& s : pool) {
                as_driver[s.driver].push_back(s.id);
                for (const auto& [od, c] : s.passenger_groups())
                    as_rider[od].push_back(s.id);
            }
            auto al_term = [&](int n) {
                const double mu = n < static_cast<int>(sol.mu.size()) ? sol.mu[n] : 0.0;
                return pos(mu + sol.rho * (sol.F[n] - sol.Z[n]));
            };
            // The driver carries the matching multiplier up to the solo drive cost.
            auto driver_cost = [&](int n, const OD& drv) {
                return seq_rd[n] + std::min(al_term(n), pos(c_da.at(drv) - seq_rd[n]));
            };
            auto rider_cost = [&](int n, const OD& od) {
                double best = kInf;
                for (std::size_t p = 0; p < pool[n].passengers.size(); ++p)
                    if (pool[n].passengers[p].od == od)
                        best = std::min(best, seq_rider[n][p]);
                return best;
            };
            auto riders_ok = [&](int n, const OD* except) {
                for (const auto& [od, c] : pool[n].passenger_groups()) {
                    if (except && od == *except)
                        continue;
                    if (od_flows(od).quit_rp <= flow_thr || !(rider_cost(n, od) < c_pt.at(od)))
                        return false;
                }
                return true;
            };
            Worst w;
            double sum = 0.0;
            for (const auto& [od, f] : sol.od) {
                ModalValues c{c_da.at(od), c_da.at(od), c_pt.at(od), c_pt.at(od)};
                // A used mode is costed by what its users realize, an unused one by the best option
                // an entrant could join.
                double acc = f.quit_rd * c_da.at(od), wt = f.quit_rd;
                for (int n : as_driver[od]) {
                    acc += sol.F[n] * driver_cost(n, od);
                    wt += sol.F[n];
                }
                if (f.q[1] > flow_thr && wt > flow_thr) {
                    c[1] = acc / wt;
                } else {
                    for (int n : as_driver[od])
                        if (riders_ok(n, nullptr))
                            c[1] = std::min(c[1], driver_cost(n, od));
                }
                acc = f.quit_rp * c_pt.at(od);
                wt = f.quit_rp;
                for (int n : as_rider[od]) {
                    const double k = pool[n].passenger_count(od) * sol.F[n];
                    acc += k * rider_cost(n, od);
                    wt += k;
                }
                if (f.q[2] > flow_thr && wt > flow_thr) {
                    c[2] = acc / wt;
                } else {
                    for (int n : as_rider[od]) {
                        const OD& drv = pool[n].driver;
                        if (od_flows(drv).quit_rd <= flow_thr || !(driver_cost(n, drv) < c_da.at(drv)))
                            continue;
                        if (!riders_ok(n, &od))
                            continue;
                        c[2] = std::min(c[2], rider_cost(n, od));
                    }
                }
                const double best = *std::min_element(c.begin(), c.end());
                double v = 0.0;
                for (int k = 0; k < kModeCount; ++k)
                    v += f.q[k] * (c[k] - best);
                sum += v;
                w.offer(v, [&] { return to_string(od); });
            }
            r.violation = sum / cost_scale;
            r.witness = w.witness;
        }
        rep.families.push_back(r);
    }

    // No directed cycle carried by positive flow within any class.
    {
        Worst w;
        for (const auto& [o, f] : sol.da_flows)
            if (has_positive_cycle(net, f, flow_thr))
                w.offer(1.0, [&] { return "DA from " + std::to_string(o); });
        for (const auto& [o, f] : sol.pt_flows)
            if (has_positive_cycle(net, f, flow_thr))
                w.offer(1.0, [&] { return "PT from " + std::to_string(o); });
        for (std::size_t n = 0; n < sol.level_flows.size(); ++n)
            for (std::size_t l = 0; l < sol.level_flows[n].size(); ++l)
                if (!sol.level_flows[n][l].empty() && has_positive_cycle(net, sol.level_flows[n][l], flow_thr))
                    w.offer(1.0, [&] { return pool[n].label() + " level " + std::to_string(l + 1); });
        rep.families.push_back({"cycles", w.value, w.witness, true});
    }

    // Platform: quotas feasible and optimal for the platform objective.
    {
        double viol = 0.0;
        std::string wit;
        std::map<OD, double> zd, zr;
        for (const auto& s : pool) {
            viol += pos(-sol.Z[s.id]);
            zd[s.driver] += sol.Z[s.id];
            for (const auto& [od, c] : s.passenger_groups())
                zr[od] += c * sol.Z[s.id];
        }
        for (auto& [od, z] : zd)
            viol += pos(z - od_flows(od).q[1]);
        for (auto& [od, z] : zr)
            viol += pos(z - od_flows(od).q[2]);
        viol /= total;
        if (!pool.empty()) {
            ODSet set;
            for (const auto& [od, f] : sol.od)
                set.add(od);
            LinearProgram lp;
            const int n = static_cast<int>(pool.size());
            lp.upper.assign(n, -1.0);
            double current = 0.0;
            for (const auto& s : pool) {
                lp.c.push_back(-s.R);
                current += s.R * sol.Z[s.id];
            }
            std::map<OD, std::vector<double>> rows_d, rows_r;
            for (const auto& s : pool) {
                auto& rd = rows_d[s.driver];
                rd.resize(n, 0.0);
                rd[s.id] = 1.0;
                for (const auto& [od, c] : s.passenger_groups()) {
                    auto& rr = rows_r[od];
                    rr.resize(n, 0.0);
                    rr[s.id] += c;
                }
            }
            for (auto& [od, row] : rows_d) {
                lp.A_le.push_back(row);
                lp.b_le.push_back(od_flows(od).q[1]);
            }
            for (auto& [od, row] : rows_r) {
                lp.A_le.push_back(row);
                lp.b_le.push_back(od_flows(od).q[2]);
            }
            const LpResult lr = solve_lp(lp);
            if (lr.feasible) {
                const double opt = -lr.objective;
                const double gap = pos(opt - current) / std::max(1.0, std::abs(opt));
                if (gap > viol)
                    wit = "quota objective " + std::to_string(current) + " below optimum " + std::to_string(opt);
                viol = std::max(viol, gap);
            }
        }
        rep.families.push_back({"platform", viol, wit, true});
    }
    return rep;
}

} // namespace seqbush::oracle
