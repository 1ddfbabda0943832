#include "seqbush/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace seqbush {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::vector<double> SweepSpec::grid() const
{
    std::vector<double> g;
    if (steps <= 1) {
        g.push_back(from);
        return g;
    }
    for (int i = 0; i < steps; ++i)
        g.push_back(from + (to - from) * i / (steps - 1));
    return g;
}

void ScenarioConfig::validate() const
{
    if (net_file.empty())
        throw ValidationError("config: [network] net_file is required");
    if (trips_file.empty() == modal_demand_file.empty())
        throw ValidationError("config: exactly one of trips_file and modal_demand_file is required");
    model.validate();
    const auto& s = solver;
    if (!(s.eps_m > 0.0 && s.eps_n > 0.0 && s.eps_3 > 0.0))
        throw ValidationError("config: tolerances must be positive");
    if (s.inner_cap < 1 || s.outer_cap < 1)
        throw ValidationError("config: iteration caps must be positive");
    if (!(s.sigma1 >= 1.0) || !(s.sigma2 > 0.0 && s.sigma2 <= 1.0))
        throw ValidationError("config: sigma1 must be >= 1 and sigma2 in (0, 1]");
    if (!(s.gamma0 > 0.0) || s.gamma_large < 0.0 || s.gamma_small < 0.0)
        throw ValidationError("config: step-size constants must be positive");
    if (pool.generation.capacity < 1 || pool.generation.max_passengers < 0)
        throw ValidationError("config: capacity must be >= 1");
    if (!(pool.generation.detour_factor >= 1.0))
        throw ValidationError("config: detour_factor must be >= 1");
    if (threads < 1)
        throw ValidationError("config: threads must be >= 1");
    if (sweep) {
        if (sweep->steps < 1)
            throw ValidationError("config: sweep steps must be >= 1");
        if (sweep->param != "nu_d_RD" && sweep->param != "alpha_driver")
            throw ValidationError("config: unknown sweep parameter " + sweep->param);
    }
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys()
{
    static const std::map<std::string, std::set<std::string>> k = {
        {"network", {"net_file", "trips_file", "modal_demand_file"}},
        {"DA", {"alpha", "beta", "tau_t", "tau_d", "nu_t", "nu_d", "fixed", "fixed_loaded"}},
        {"RD", {"alpha", "beta", "tau_t", "tau_d", "nu_t", "nu_d", "fixed", "fixed_loaded"}},
        {"RP", {"alpha", "beta", "tau_t", "tau_d", "nu_t", "nu_d", "fixed", "fixed_loaded"}},
        {"PT", {"alpha", "beta", "tau_t", "tau_d", "nu_t", "nu_d", "fixed", "fixed_loaded"}},
        {"pt", {"time_source", "time_factor", "pce"}},
        {"matching",
         {"enabled", "capacity", "max_passengers", "detour_factor", "passenger_detour_factor",
          "require_positive_saving", "max_sequences_per_driver", "max_candidate_passengers"}},
        {"solver",
         {"eps_m", "eps_n", "eps_3", "inner_cap", "outer_cap", "sigma1", "sigma2", "gamma0", "gamma_large",
          "gamma_small", "mode_step", "match_step", "push_prox", "even_initial_split", "immediate_cost_refresh",
          "max_moves_per_group", "min_inner_iterations", "flow_eps", "log_every"}},
        {"run", {"output_dir", "baseline", "verify", "threads", "deterministic", "verify_max_nodes",
                 "verify_max_sequences"}},
        {"sweep", {"param", "from", "to", "steps"}},
    };
    return k;
}

template <class T>
void read(const pt::ptree& t, const char* section, const char* key, T& out)
{
    const auto sec = t.get_child_optional(pt::ptree::path_type(section, '/'));
    if (!sec)
        return;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!v)
        return;
    try {
        if constexpr (std::is_same_v<T, bool>) {
            std::string s = *v;
            std::transform(s.begin(), s.end(), s.begin(), ::tolower);
            if (s == "true" || s == "1" || s == "yes" || s == "on")
                out = true;
            else if (s == "false" || s == "0" || s == "no" || s == "off")
                out = false;
            else
                throw std::invalid_argument(s);
        } else if constexpr (std::is_same_v<T, std::string>) {
            out = *v;
        } else {
            out = sec->get<T>(pt::ptree::path_type(key, '/'));
        }
    } catch (const std::exception&) {
        throw ValidationError(std::string("config: invalid value for [") + section + "] " + key + ": " + *v);
    }
}

std::string resolve(const std::string& base, const std::string& p)
{
    if (p.empty())
        return p;
    fs::path path(p);
    if (path.is_absolute() || base.empty())
        return path.string();
    return (fs::path(base) / path).lexically_normal().string();
}

} // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& base_dir)
{
    pt::ptree t;
    try {
        pt::read_ini(in, t);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.message(), static_cast<int>(e.line()));
    }
    for (const auto& [sec, child] : t) {
        const auto it = known_keys().find(sec);
        if (it == known_keys().end())
            throw ValidationError("config: unknown section [" + sec + "]");
        for (const auto& [key, v] : child)
            if (!it->second.count(key))
                throw ValidationError("config: unknown key " + key + " in [" + sec + "]");
    }
    ScenarioConfig c;
    read(t, "network", "net_file", c.net_file);
    read(t, "network", "trips_file", c.trips_file);
    read(t, "network", "modal_demand_file", c.modal_demand_file);
    c.net_file = resolve(base_dir, c.net_file);
    c.trips_file = resolve(base_dir, c.trips_file);
    c.modal_demand_file = resolve(base_dir, c.modal_demand_file);
    for (int m = 0; m < kModeCount; ++m) {
        const char* sec = mode_name(static_cast<Mode>(m));
        auto& p = c.model.mode[m];
        read(t, sec, "alpha", p.alpha);
        read(t, sec, "beta", p.beta);
        read(t, sec, "tau_t", p.tau_t);
        read(t, sec, "tau_d", p.tau_d);
        read(t, sec, "nu_t", p.nu_t);
        read(t, sec, "nu_d", p.nu_d);
        read(t, sec, "fixed", p.fixed);
        read(t, sec, "fixed_loaded", p.fixed_loaded);
    }
    std::string ts;
    read(t, "pt", "time_source", ts);
    if (ts == "road")
        c.model.pt_time = PtTimeSource::Road;
    else if (ts == "free_flow" || ts.empty())
        c.model.pt_time = PtTimeSource::FreeFlow;
    else
        throw ValidationError("config: [pt] time_source must be free_flow or road");
    read(t, "pt", "time_factor", c.model.pt_time_factor);
    read(t, "pt", "pce", c.model.pt_pce);

    auto& g = c.pool.generation;
    read(t, "matching", "enabled", c.ridesharing);
    read(t, "matching", "capacity", g.capacity);
    read(t, "matching", "max_passengers", g.max_passengers);
    read(t, "matching", "detour_factor", g.detour_factor);
    read(t, "matching", "passenger_detour_factor", g.passenger_detour_factor);
    read(t, "matching", "require_positive_saving", c.pool.require_positive_saving);
    read(t, "matching", "max_sequences_per_driver", c.pool.max_sequences_per_driver);
    read(t, "matching", "max_candidate_passengers", c.pool.max_candidate_passengers);

    auto& s = c.solver;
    read(t, "solver", "eps_m", s.eps_m);
    read(t, "solver", "eps_n", s.eps_n);
    read(t, "solver", "eps_3", s.eps_3);
    read(t, "solver", "inner_cap", s.inner_cap);
    read(t, "solver", "outer_cap", s.outer_cap);
    read(t, "solver", "sigma1", s.sigma1);
    read(t, "solver", "sigma2", s.sigma2);
    read(t, "solver", "gamma0", s.gamma0);
    read(t, "solver", "gamma_large", s.gamma_large);
    read(t, "solver", "gamma_small", s.gamma_small);
    read(t, "solver", "mode_step", s.mode_step);
    read(t, "solver", "match_step", s.match_step);
    read(t, "solver", "push_prox", s.push_prox);
    read(t, "solver", "even_initial_split", s.even_initial_split);
    read(t, "solver", "immediate_cost_refresh", s.immediate_cost_refresh);
    read(t, "solver", "max_moves_per_group", s.max_moves_per_group);
    read(t, "solver", "min_inner_iterations", s.min_inner_iterations);
    read(t, "solver", "flow_eps", s.flow_eps);
    read(t, "solver", "log_every", s.log_every);

    read(t, "run", "output_dir", c.output_dir);
    c.output_dir = resolve(base_dir, c.output_dir);
    read(t, "run", "baseline", c.baseline);
    read(t, "run", "verify", c.verify);
    read(t, "run", "threads", c.threads);
    read(t, "run", "deterministic", c.deterministic);
    read(t, "run", "verify_max_nodes", c.verify_max_nodes);
    read(t, "run", "verify_max_sequences", c.verify_max_sequences);

    if (t.get_child_optional("sweep")) {
        SweepSpec sw;
        read(t, "sweep", "param", sw.param);
        read(t, "sweep", "from", sw.from);
        read(t, "sweep", "to", sw.to);
        read(t, "sweep", "steps", sw.steps);
        c.sweep = sw;
    }
    c.solver.mode_choice = c.modal_demand_file.empty();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open config " + path, 0);
    auto c = parse_config(in, fs::path(path).parent_path().string());
    c.source_path = path;
    return c;
}

void apply_sweep_value(CostModel& model, const std::string& param, double value)
{
    if (param == "nu_d_RD") {
        model.params(Mode::RD).nu_d = value;
        model.params(Mode::RP).nu_d = 0.5 * value;
    } else if (param == "alpha_driver") {
        model.params(Mode::DA).alpha = value;
        model.params(Mode::RD).alpha = value;
    } else {
        throw ValidationError("unknown sweep parameter " + param);
    }
}

ScenarioInputs load_inputs(const ScenarioConfig& cfg)
{
    ScenarioInputs in;
    in.net = load_tntp_network(cfg.net_file);
    if (!cfg.modal_demand_file.empty()) {
        in.modal = load_modal_demand_csv(cfg.modal_demand_file);
        in.fixed_modes = true;
        for (const auto& [od, q] : in.modal.entries) {
            double s = 0.0;
            for (double v : q)
                s += v;
            if (s > 0.0)
                in.demand.entries[od] = s;
        }
    } else {
        in.demand = load_tntp_trips(cfg.trips_file);
    }
    for (const auto& [od, q] : in.demand.entries)
        if (od.o > in.net.node_count || od.d > in.net.node_count)
            throw ValidationError("demand OD " + to_string(od) + " refers to a node outside the network");
    if (cfg.ridesharing)
        in.pool = build_pool(cfg, in);
    return in;
}

std::vector<MatchingSequence> build_pool(const ScenarioConfig& cfg, const ScenarioInputs& in)
{
    std::vector<OD> drivers, riders;
    if (in.fixed_modes) {
        for (const auto& [od, q] : in.modal.entries) {
            if (q[static_cast<int>(Mode::RD)] > 0.0)
                drivers.push_back(od);
            if (q[static_cast<int>(Mode::RP)] > 0.0)
                riders.push_back(od);
        }
    } else {
        for (const auto& [od, q] : in.demand.entries) {
            drivers.push_back(od);
            riders.push_back(od);
        }
    }
    const SkimMatrix skim = free_flow_skims(in.net);
    return build_sequence_pool(drivers, riders, cfg.pool, skim);
}

Problem make_problem(const ScenarioConfig& cfg, const ScenarioInputs& in, bool with_ridesharing)
{
    Problem p;
    p.net = &in.net;
    p.model = cfg.model;
    if (with_ridesharing)
        p.pool = in.pool;
    p.demand = in.demand;
    p.modal_demand = in.modal;
    p.capacity = cfg.pool.generation.capacity;
    return p;
}

NetworkMetrics network_metrics(const Network& net, const CostModel& model, const std::vector<MatchingSequence>& pool,
                               const EquilibriumSolution& sol)
{
    NetworkMetrics m;
    const int L = net.link_count();
    const auto x = sol.flows.vehicle_flows(L);
    const auto xp = sol.flows.pt_link_flows(L);
    for (int a = 0; a < L; ++a) {
        const Link& l = net.links[a];
        const double t = link_travel_time(l, x[a]);
        m.vkt += x[a] * l.length + xp[a] * l.length / model.pt_pce;
        m.vht += x[a] * t + xp[a] * model.pt_link_time(l, t) / model.pt_pce;
    }
    double total = 0.0, da = 0.0, pt_ = 0.0, rd = 0.0, rp = 0.0;
    for (const auto& [od, f] : sol.flows.od) {
        total += f.demand;
        da += f.q[0] + f.quit_rd;
        pt_ += f.q[3] + f.quit_rp;
    }
    for (const auto& s : pool) {
        rd += sol.flows.F[s.id];
        rp += s.passengers.size() * sol.flows.F[s.id];
    }
    m.total_demand = total;
    m.matched_riders = rp;
    if (total > 0.0)
        m.shares = {da / total, rd / total, rp / total, pt_ / total};
    return m;
}

void fill_savings(RunReport& r)
{
    if (!r.without_rs)
        return;
    const auto& b = *r.without_rs;
    r.trips_saved = r.with_rs.matched_riders;
    r.vkt_saved = b.vkt - r.with_rs.vkt;
    r.vht_saved = b.vht - r.with_rs.vht;
    r.trips_saved_pct = r.with_rs.total_demand > 0.0 ? 100.0 * r.trips_saved / r.with_rs.total_demand : 0.0;
    r.vkt_saved_pct = b.vkt > 0.0 ? 100.0 * r.vkt_saved / b.vkt : 0.0;
    r.vht_saved_pct = b.vht > 0.0 ? 100.0 * r.vht_saved / b.vht : 0.0;
}

std::string RunReport::summary() const
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "converged: " << (converged ? "yes" : "no") << "\n";
    os << "inner iterations: " << inner_iterations << ", outer iterations: " << outer_iterations << "\n";
    os << "final gaps: G_M " << final_gap.G_M << ", G_N " << final_gap.G_N << ", AL ratio " << final_gap.al_ratio
       << ", violation " << final_gap.violation << "\n";
    os << "sequences: " << sequence_count << "\n";
    os << "wall time [s]: " << wall_seconds << "\n";
    auto shares = [&](const NetworkMetrics& m) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << "DA " << 100 * m.shares[0] << "%, RD " << 100 * m.shares[1]
          << "%, RP " << 100 * m.shares[2] << "%, PT " << 100 * m.shares[3] << "%";
        return s.str();
    };
    os << std::setprecision(2);
    os << "with ridesharing: " << shares(with_rs) << "; VKT " << with_rs.vkt << ", VHT " << with_rs.vht << "\n";
    if (without_rs) {
        os << "without ridesharing: " << shares(*without_rs) << "; VKT " << without_rs->vkt << ", VHT "
           << without_rs->vht << "\n";
        os << "trips saved: " << trips_saved << " (" << trips_saved_pct << "%)\n";
        os << "VKT saved: " << vkt_saved << " (" << vkt_saved_pct << "%)\n";
        os << "VHT saved: " << vht_saved << " (" << vht_saved_pct << "%)\n";
    }
    if (verification) {
        os << "verification: " << (verification_passed ? "passed" : "FAILED") << "\n" << verification->to_text();
    } else {
        os << "verification: not run\n";
    }
    return os.str();
}

namespace {

SolverConfig solver_config(const ScenarioConfig& cfg, const ScenarioInputs& in)
{
    SolverConfig s = cfg.solver;
    s.mode_choice = !in.fixed_modes;
    return s;
}

void verify_into(RunReport& r, const ScenarioConfig& cfg, const ScenarioInputs& in)
{
    if (!cfg.verify || in.net.node_count > cfg.verify_max_nodes
        || static_cast<int>(in.pool.size()) > cfg.verify_max_sequences)
        return;
    oracle::VerifyInput vi;
    vi.net = &in.net;
    vi.model = cfg.model;
    vi.pool = &in.pool;
    vi.flows = &r.solution.flows;
    vi.endogenous_modes = !in.fixed_modes;
    vi.capacity = cfg.pool.generation.capacity;
    r.verification = oracle::verify_solution(vi);
    r.verification_passed = r.verification->passes(1e-2);
}

RunReport finish(EquilibriumSolution sol, const ScenarioConfig& cfg, const ScenarioInputs& in,
                 const std::vector<MatchingSequence>& pool)
{
    RunReport r;
    r.with_rs = network_metrics(in.net, cfg.model, pool, sol);
    r.converged = sol.converged;
    r.final_gap = sol.final_gap;
    r.inner_iterations = sol.inner_iterations;
    r.outer_iterations = sol.outer_iterations;
    r.sequence_count = pool.size();
    r.solution = std::move(sol);
    return r;
}

} // namespace

RunReport run_scenario(const ScenarioConfig& cfg) { return run_scenario(cfg, load_inputs(cfg)); }

RunReport run_scenario(const ScenarioConfig& cfg, const ScenarioInputs& in)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Problem p = make_problem(cfg, in, cfg.ridesharing);
    RunReport r = finish(solve(p, solver_config(cfg, in)), cfg, in, p.pool);
    if (cfg.baseline && cfg.ridesharing) {
        const Problem p0 = make_problem(cfg, in, false);
        const EquilibriumSolution b = solve(p0, solver_config(cfg, in));
        r.without_rs = network_metrics(in.net, cfg.model, p0.pool, b);
        r.converged = r.converged && b.converged;
    }
    fill_savings(r);
    if (cfg.ridesharing)
        verify_into(r, cfg, in);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<SweepPoint> run_sweep(const ScenarioConfig& cfg, const SweepSpec& spec)
{
    const ScenarioInputs in = load_inputs(cfg);
    const auto grid = spec.grid();
    std::vector<SweepPoint> points(grid.size());
    const int threads = cfg.deterministic ? 1 : std::max(1, cfg.threads);

    auto solve_point = [&](std::size_t i, EquilibriumSolver* warm, EquilibriumSolver* warm_base) {
        SweepPoint& pt_ = points[i];
        pt_.value = grid[i];
        try {
            ScenarioConfig c = cfg;
            apply_sweep_value(c.model, spec.param, grid[i]);
            c.model.validate();
            const auto t0 = std::chrono::steady_clock::now();
            const Problem p = make_problem(c, in, c.ridesharing);
            EquilibriumSolution sol;
            if (warm) {
                warm->set_cost_model(c.model);
                sol = warm->solve();
            } else {
                sol = solve(p, solver_config(c, in));
            }
            RunReport r = finish(std::move(sol), c, in, p.pool);
            if (c.baseline && c.ridesharing) {
                const Problem p0 = make_problem(c, in, false);
                EquilibriumSolution b;
                if (warm_base) {
                    warm_base->set_cost_model(c.model);
                    b = warm_base->solve();
                } else {
                    b = solve(p0, solver_config(c, in));
                }
                r.without_rs = network_metrics(in.net, c.model, p0.pool, b);
                r.converged = r.converged && b.converged;
            }
            fill_savings(r);
            r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            pt_.report = std::move(r);
        } catch (const std::exception& e) {
            pt_.error = e.what();
        }
    };

    if (threads == 1) {
        std::unique_ptr<EquilibriumSolver> warm, warm_base;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!warm) {
                ScenarioConfig c = cfg;
                try {
                    apply_sweep_value(c.model, spec.param, grid[i]);
                    const Problem p = make_problem(c, in, c.ridesharing);
                    warm = std::make_unique<EquilibriumSolver>(p, solver_config(c, in));
                    warm->initialize();
                    if (c.baseline && c.ridesharing) {
                        warm_base = std::make_unique<EquilibriumSolver>(make_problem(c, in, false),
                                                                        solver_config(c, in));
                        warm_base->initialize();
                    }
                } catch (const std::exception& e) {
                    points[i].value = grid[i];
                    points[i].error = e.what();
                    warm.reset();
                    warm_base.reset();
                    continue;
                }
            }
            solve_point(i, warm.get(), warm_base.get());
            if (!points[i].error.empty()) {
                warm.reset();
                warm_base.reset();
            }
        }
        return points;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= grid.size())
                        return;
                    i = next++;
                }
                solve_point(i, nullptr, nullptr);
            }
        });
    }
    for (auto& th : pool)
        th.join();
    return points;
}

// ---------------------------------------------------------------------------------------------
// Solution directory

namespace {

std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p);
    if (!out)
        throw ParseError("cannot write " + p.string(), 0);
    out << std::setprecision(17);
    return out;
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            f.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    f.push_back(cur);
    return f;
}

template <class Fn>
void read_csv(const fs::path& p, std::size_t min_fields, Fn fn)
{
    std::ifstream in(p);
    if (!in)
        throw ParseError("cannot open " + p.string(), 0);
    std::string line;
    int line_no = 0;
    std::getline(in, line); // header
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto f = split_csv(line);
        if (f.size() < min_fields)
            throw ParseError(p.filename().string() + ": expected " + std::to_string(min_fields) + " fields", line_no);
        try {
            fn(f);
        } catch (const std::invalid_argument&) {
            throw ParseError(p.filename().string() + ": malformed number", line_no);
        } catch (const std::out_of_range&) {
            throw ParseError(p.filename().string() + ": number out of range", line_no);
        }
    }
}

nlohmann::json model_json(const CostModel& m)
{
    nlohmann::json j;
    for (int k = 0; k < kModeCount; ++k) {
        const auto& p = m.mode[k];
        j["modes"][mode_name(static_cast<Mode>(k))] = {{"alpha", p.alpha}, {"beta", p.beta},   {"tau_t", p.tau_t},
                                                       {"tau_d", p.tau_d}, {"nu_t", p.nu_t},   {"nu_d", p.nu_d},
                                                       {"fixed", p.fixed}, {"fixed_loaded", p.fixed_loaded}};
    }
    j["pt_time"] = m.pt_time == PtTimeSource::Road ? "road" : "free_flow";
    j["pt_time_factor"] = m.pt_time_factor;
    j["pt_pce"] = m.pt_pce;
    return j;
}

CostModel model_from_json(const nlohmann::json& j)
{
    CostModel m;
    for (int k = 0; k < kModeCount; ++k) {
        const auto& p = j.at("modes").at(mode_name(static_cast<Mode>(k)));
        m.mode[k] = {p.at("alpha").get<double>(), p.at("beta").get<double>(), p.at("tau_t").get<double>(),
                     p.at("tau_d").get<double>(), p.at("nu_t").get<double>(), p.at("nu_d").get<double>(),
                     p.at("fixed").get<double>(), p.at("fixed_loaded").get<double>()};
    }
    m.pt_time = j.at("pt_time").get<std::string>() == "road" ? PtTimeSource::Road : PtTimeSource::FreeFlow;
    m.pt_time_factor = j.at("pt_time_factor").get<double>();
    m.pt_pce = j.at("pt_pce").get<double>();
    return m;
}

} // namespace

void write_solution_dir(const std::string& dir, const ScenarioConfig& cfg, const ScenarioInputs& in,
                        const RunReport& report)
{
    const fs::path d(dir);
    fs::create_directories(d);
    const auto& sol = report.solution;
    const auto& net = in.net;
    const int L = net.link_count();

    if (!cfg.source_path.empty() && fs::exists(cfg.source_path))
        fs::copy_file(cfg.source_path, d / "config.ini", fs::copy_options::overwrite_existing);
    {
        auto out = open_out(d / "network.tntp");
        out << write_tntp_network(net);
    }
    {
        auto out = open_out(d / "sequences.jsonl");
        write_sequence_dump(out, in.pool);
    }
    {
        nlohmann::json meta;
        meta["capacity"] = cfg.pool.generation.capacity;
        meta["endogenous_modes"] = !in.fixed_modes;
        meta["converged"] = report.converged;
        meta["rho"] = sol.flows.rho;
        meta["model"] = model_json(cfg.model);
        auto out = open_out(d / "meta.json");
        out << meta.dump(2) << "\n";
    }
    {
        auto out = open_out(d / "summary.txt");
        out << report.summary();
    }
    {
        auto out = open_out(d / "links.csv");
        out << "link,tail,head,vehicles,pt_flow,time,pt_time,length\n";
        const auto x = sol.flows.vehicle_flows(L);
        const auto xp = sol.flows.pt_link_flows(L);
        for (int a = 0; a < L; ++a) {
            const Link& l = net.links[a];
            const double t = link_travel_time(l, x[a]);
            out << a << ',' << l.tail << ',' << l.head << ',' << x[a] << ',' << xp[a] << ',' << t << ','
                << cfg.model.pt_link_time(l, t) << ',' << l.length << "\n";
        }
    }
    {
        auto out = open_out(d / "sequences.csv");
        out << "id,driver_o,driver_d,label,R,min_cost,max_cost,rd_cost,generalized_cost,rider_costs,F,Z,mu\n";
        for (const auto& s : sol.sequences) {
            out << s.id << ',' << s.driver.o << ',' << s.driver.d << ',' << '"' << s.label << '"' << ',' << s.R
                << ',' << s.min_cost << ',' << s.max_cost << ',' << s.rd_cost << ',' << s.generalized_cost << ',';
            for (std::size_t k = 0; k < s.rider_costs.size(); ++k)
                out << (k ? ";" : "") << s.rider_costs[k].first.o << '-' << s.rider_costs[k].first.d << ':'
                    << s.rider_costs[k].second;
            out << ',' << s.F << ',' << s.Z << ',' << s.mu << "\n";
        }
    }
    {
        auto out = open_out(d / "od.csv");
        out << "o,d,demand,q_DA,q_RD,q_RP,q_PT,quit_RD,quit_RP,C_DA,C_RD,C_RP,C_PT\n";
        for (const auto& r : sol.ods) {
            out << r.od.o << ',' << r.od.d << ',' << r.flows.demand;
            for (double v : r.flows.q)
                out << ',' << v;
            out << ',' << r.flows.quit_rd << ',' << r.flows.quit_rp;
            for (double v : r.cost)
                out << ',' << v;
            out << "\n";
        }
    }
    {
        auto out = open_out(d / "modal_shares.csv");
        out << "scenario,DA,RD,RP,PT,VKT,VHT\n";
        auto row = [&](const char* name, const NetworkMetrics& m) {
            out << name;
            for (double v : m.shares)
                out << ',' << v;
            out << ',' << m.vkt << ',' << m.vht << "\n";
        };
        row("with_rs", report.with_rs);
        if (report.without_rs)
            row("without_rs", *report.without_rs);
    }
    {
        auto out = open_out(d / "gaps.csv");
        out << "inner,outer,G_M,G_N,route_gap,sequence_gap,al_ratio,violation\n";
        for (const auto& g : sol.history)
            out << g.inner_iteration << ',' << g.outer_iteration << ',' << g.G_M << ',' << g.G_N << ','
                << g.route_gap << ',' << g.sequence_gap << ',' << g.al_ratio << ',' << g.violation << "\n";
    }
    {
        auto out = open_out(d / "level_flows.csv");
        out << "sequence,level,link,flow\n";
        for (std::size_t n = 0; n < sol.flows.level_flows.size(); ++n)
            for (std::size_t l = 0; l < sol.flows.level_flows[n].size(); ++l)
                for (std::size_t a = 0; a < sol.flows.level_flows[n][l].size(); ++a)
                    if (sol.flows.level_flows[n][l][a] != 0.0)
                        out << n << ',' << l + 1 << ',' << a << ',' << sol.flows.level_flows[n][l][a] << "\n";
    }
    {
        auto out = open_out(d / "origin_flows.csv");
        out << "class,origin,link,flow\n";
        for (const auto& [cls, m] : {std::pair{"DA", &sol.flows.da_flows}, std::pair{"PT", &sol.flows.pt_flows}})
            for (const auto& [o, f] : *m)
                for (std::size_t a = 0; a < f.size(); ++a)
                    if (f[a] != 0.0)
                        out << cls << ',' << o << ',' << a << ',' << f[a] << "\n";
    }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& points, const std::string& param)
{
    auto out = open_out(path);
    out << param << ",converged,DA,RD,RP,PT,VKT,VHT,VKT_saved_pct,VHT_saved_pct,trips_saved_pct,error\n";
    for (const auto& p : points) {
        const auto& r = p.report;
        out << p.value << ',' << (p.error.empty() && r.converged ? 1 : 0);
        for (double v : r.with_rs.shares)
            out << ',' << v;
        out << ',' << r.with_rs.vkt << ',' << r.with_rs.vht << ',' << r.vkt_saved_pct << ',' << r.vht_saved_pct
            << ',' << r.trips_saved_pct << ',' << '"' << p.error << '"' << "\n";
    }
}

StoredSolution read_solution_dir(const std::string& dir)
{
    const fs::path d(dir);
    StoredSolution s;
    s.net = load_tntp_network((d / "network.tntp").string());
    {
        std::ifstream in(d / "meta.json");
        if (!in)
            throw ParseError("cannot open " + (d / "meta.json").string(), 0);
        try {
            const auto meta = nlohmann::json::parse(in);
            s.capacity = meta.at("capacity").get<int>();
            s.endogenous_modes = meta.at("endogenous_modes").get<bool>();
            s.converged = meta.at("converged").get<bool>();
            s.flows.rho = meta.at("rho").get<double>();
            s.model = model_from_json(meta.at("model"));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("meta.json: ") + e.what(), 0);
        }
    }
    {
        std::ifstream in(d / "sequences.jsonl");
        if (!in)
            throw ParseError("cannot open sequences.jsonl", 0);
        s.pool = read_sequence_dump(in);
    }
    const std::size_t n = s.pool.size();
    const int L = s.net.link_count();
    s.flows.F.assign(n, 0.0);
    s.flows.Z.assign(n, 0.0);
    s.flows.mu.assign(n, 0.0);
    s.flows.level_flows.assign(n, {});
    for (const auto& seq : s.pool)
        s.flows.level_flows[seq.id].assign(seq.level_count(), {});
    read_csv(d / "sequences.csv", 13, [&](const std::vector<std::string>& f) {
        // The label is quoted and contains commas; numeric fields are counted from the end.
        const std::size_t k = f.size();
        const int id = std::stoi(f[0]);
        if (id < 0 || id >= static_cast<int>(n))
            throw ParseError("sequences.csv: unknown sequence id " + f[0], 0);
        s.flows.F[id] = std::stod(f[k - 3]);
        s.flows.Z[id] = std::stod(f[k - 2]);
        s.flows.mu[id] = std::stod(f[k - 1]);
    });
    read_csv(d / "od.csv", 9, [&](const std::vector<std::string>& f) {
        ODFlows o;
        const OD od{std::stoi(f[0]), std::stoi(f[1])};
        o.demand = std::stod(f[2]);
        for (int m = 0; m < kModeCount; ++m)
            o.q[m] = std::stod(f[3 + m]);
        o.quit_rd = std::stod(f[7]);
        o.quit_rp = std::stod(f[8]);
        s.flows.od[od] = o;
    });
    read_csv(d / "level_flows.csv", 4, [&](const std::vector<std::string>& f) {
        const int seq = std::stoi(f[0]), level = std::stoi(f[1]), a = std::stoi(f[2]);
        if (seq < 0 || seq >= static_cast<int>(n) || level < 1 || level > s.pool[seq].level_count() || a < 0
            || a >= L)
            throw ParseError("level_flows.csv: index out of range", 0);
        auto& v = s.flows.level_flows[seq][level - 1];
        if (v.empty())
            v.assign(L, 0.0);
        v[a] = std::stod(f[3]);
    });
    read_csv(d / "origin_flows.csv", 4, [&](const std::vector<std::string>& f) {
        const int o = std::stoi(f[1]), a = std::stoi(f[2]);
        if (a < 0 || a >= L)
            throw ParseError("origin_flows.csv: link out of range", 0);
        auto& m = f[0] == "DA" ? s.flows.da_flows : s.flows.pt_flows;
        auto& v = m[o];
        if (v.empty())
            v.assign(L, 0.0);
        v[a] = std::stod(f[3]);
    });
    return s;
}

} // namespace seqbush
