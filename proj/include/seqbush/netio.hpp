#pragma once

// Network and demand input, volume-delay evaluation and per-class link costs.

#include <array>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace seqbush {

/// Raised when an input file does not follow the expected text format.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Raised when parsed data violates a domain invariant (zero capacity, negative demand, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a caller breaks a documented precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline void require(bool cond, const char* msg)
{
    if (!cond)
        throw ContractError(msg);
}

struct Link {
    int tail = 0;
    int head = 0;
    double capacity = 1.0;
    double length = 0.0;
    double free_flow_time = 1.0;
    double bpr_alpha = 0.15;
    double bpr_beta = 4.0;
    double speed = 0.0;
    double toll = 0.0;
    int type = 1;
};

bool operator==(const Link& a, const Link& b);

/// Directed network with nodes numbered 1..node_count (TNTP convention).
struct Network {
    int node_count = 0;
    int zone_count = 0;
    int first_thru_node = 1;
    std::vector<Link> links;
    std::vector<int> origins;      // sorted, unique
    std::vector<int> destinations; // sorted, unique

    // Built by finalize(); indexed by node id (slot 0 unused).
    std::vector<std::vector<int>> out_links;
    std::vector<std::vector<int>> in_links;

    /// Validates links and builds adjacency lists. Must be called after editing `links`.
    void finalize();
    int link_count() const { return static_cast<int>(links.size()); }
    /// Returns the index of link (tail, head) or -1.
    int find_link(int tail, int head) const;
    /// Node may pass through traffic (TNTP first-thru-node rule).
    bool is_thru(int node) const { return node >= first_thru_node; }
};

bool same_topology(const Network& a, const Network& b);

struct OD {
    int o = 0;
    int d = 0;
    auto operator<=>(const OD&) const = default;
};

std::string to_string(const OD& od);

/// Total OD demand, only strictly positive pairs are stored.
struct DemandTable {
    std::map<OD, double> entries;
    double total() const;
    std::size_t size() const { return entries.size(); }
};

Network parse_tntp_network(std::istream& in);
Network load_tntp_network(const std::string& path);
std::string write_tntp_network(const Network& net);

/// Parses a TNTP trips file. Intra-zonal and zero entries are dropped; `dropped_intrazonal`
/// receives the amount of positive o=d demand that was discarded.
DemandTable parse_tntp_trips(std::istream& in, double* dropped_intrazonal = nullptr);
DemandTable load_tntp_trips(const std::string& path, double* dropped_intrazonal = nullptr);

// Travel modes. The numeric order doubles as the tie-break order for mode choice.
enum class Mode : int { DA = 0, RD = 1, RP = 2, PT = 3 };
inline constexpr int kModeCount = 4;
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

using ModalValues = std::array<double, kModeCount>;

/// Demand per OD and mode, read from origin,destination,mode,demand rows.
struct ModalDemandTable {
    std::map<OD, ModalValues> entries;
    double total() const;
};

ModalDemandTable parse_modal_demand_csv(std::istream& in);
ModalDemandTable load_modal_demand_csv(const std::string& path);

double link_travel_time(const Link& link, double vehicular_flow);
double link_travel_time_derivative(const Link& link, double vehicular_flow);

/// Link cost classes of the hyper-network.
enum class LinkClass : int { DA = 0, RDEmpty = 1, RDLoaded = 2, RP = 3, PT = 4 };
const char* link_class_name(LinkClass c);

struct ModeCostParams {
    double alpha = 0.0; // value of time
    double beta = 0.0;  // operating cost per distance (drivers)
    double tau_t = 0.0; // inconvenience per unit time
    double tau_d = 0.0; // inconvenience per unit distance
    double nu_t = 0.0;  // price per unit time
    double nu_d = 0.0;  // price per unit distance
    double fixed = 0.0; // per-link additive constant
    // Additive constant used by RD while carrying passengers; ignored for other modes.
    double fixed_loaded = 0.0;
};

/// Affine link cost a*t + b*d + fixed.
struct ClassCoeffs {
    double a = 0.0;
    double b = 0.0;
    double fixed = 0.0;
    double operator()(double time, double length) const { return a * time + b * length + fixed; }
};

enum class PtTimeSource { FreeFlow, Road };

struct CostModel {
    std::array<ModeCostParams, kModeCount> mode{};
    PtTimeSource pt_time = PtTimeSource::FreeFlow;
    double pt_time_factor = 1.0;
    double pt_pce = 3.0;

    const ModeCostParams& params(Mode m) const { return mode[static_cast<int>(m)]; }
    ModeCostParams& params(Mode m) { return mode[static_cast<int>(m)]; }
    ClassCoeffs coeffs(LinkClass c) const;
    /// Travel time used by PT on a link given the current road time.
    double pt_link_time(const Link& link, double road_time) const;
    /// d(pt time)/d(road time): 0 when PT runs on its own fixed schedule.
    double pt_time_response() const { return pt_time == PtTimeSource::Road ? pt_time_factor : 0.0; }
    void validate() const;
};

/// Sioux Falls parameter table defaults (DA/RD/RP/PT).
CostModel default_cost_model();

double class_link_cost(const Link& link, LinkClass cls, double time, const CostModel& model);

/// Same-node move between consecutive tasks of a sequence; no time, no distance.
inline constexpr double virtual_link_cost() { return 0.0; }

/// One-to-all shortest path tree on non-negative link costs.
struct ShortestPathTree {
    int root = 0;
    std::vector<double> dist;  // by node id, +inf when unreachable
    std::vector<int> pred;     // incoming link index, -1 at root/unreachable
    std::vector<int> path_to(const Network& net, int node) const; // link indices root->node
};

ShortestPathTree dijkstra(const Network& net, int root, const std::vector<double>& link_cost);

/// All-pairs free-flow times and the lengths of shortest-length paths.
struct SkimMatrix {
    int n = 0;
    std::vector<double> time;   // (n+1)^2, shortest free-flow time
    std::vector<double> length; // (n+1)^2, shortest length
    double t(int i, int j) const { return time[static_cast<std::size_t>(i) * (n + 1) + j]; }
    double d(int i, int j) const { return length[static_cast<std::size_t>(i) * (n + 1) + j]; }
};

SkimMatrix free_flow_skims(const Network& net);

} // namespace seqbush
