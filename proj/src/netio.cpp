#include "seqbush/netio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <queue>
#include <sstream>

namespace seqbush {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s)
{
    const auto p = s.find('~');
    return p == std::string::npos ? s : s.substr(0, p);
}

bool parse_metadata(const std::string& line, std::string& key, std::string& value)
{
    if (line.empty() || line[0] != '<')
        return false;
    const auto close = line.find('>');
    if (close == std::string::npos)
        return false;
    key = line.substr(1, close - 1);
    value = trim(line.substr(close + 1));
    return true;
}

int to_int(const std::string& s, int line)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || v != std::floor(v))
            throw ParseError("expected integer, got '" + s + "'", line);
        return static_cast<int>(v);
    } catch (const std::invalid_argument&) {
        throw ParseError("expected integer, got '" + s + "'", line);
    } catch (const std::out_of_range&) {
        throw ParseError("integer out of range: '" + s + "'", line);
    }
}

double to_double(const std::string& s, int line)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v))
            throw ParseError("expected number, got '" + s + "'", line);
        return v;
    } catch (const std::invalid_argument&) {
        throw ParseError("expected number, got '" + s + "'", line);
    } catch (const std::out_of_range&) {
        throw ParseError("number out of range: '" + s + "'", line);
    }
}

std::ifstream open_or_throw(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path, 0);
    return in;
}

} // namespace

bool operator==(const Link& a, const Link& b)
{
    return a.tail == b.tail && a.head == b.head && a.capacity == b.capacity && a.length == b.length
        && a.free_flow_time == b.free_flow_time && a.bpr_alpha == b.bpr_alpha && a.bpr_beta == b.bpr_beta
        && a.speed == b.speed && a.toll == b.toll && a.type == b.type;
}

void Network::finalize()
{
    for (const auto& l : links) {
        node_count = std::max({node_count, l.tail, l.head});
    }
    for (std::size_t i = 0; i < links.size(); ++i) {
        const Link& l = links[i];
        const std::string tag = "link " + std::to_string(l.tail) + "->" + std::to_string(l.head);
        if (l.tail < 1 || l.head < 1)
            throw ValidationError(tag + ": node ids must be positive");
        if (l.tail == l.head)
            throw ValidationError(tag + ": self loop");
        if (!(l.capacity > 0.0))
            throw ValidationError(tag + ": capacity must be positive");
        if (!(l.free_flow_time > 0.0))
            throw ValidationError(tag + ": free flow time must be positive");
        if (l.length < 0.0)
            throw ValidationError(tag + ": negative length");
        if (l.bpr_alpha < 0.0 || l.bpr_beta < 1.0)
            throw ValidationError(tag + ": BPR parameters need alpha >= 0 and beta >= 1");
    }
    out_links.assign(node_count + 1, {});
    in_links.assign(node_count + 1, {});
    for (int i = 0; i < link_count(); ++i) {
        out_links[links[i].tail].push_back(i);
        in_links[links[i].head].push_back(i);
    }
    for (int n = 1; n <= node_count; ++n) {
        std::vector<int> heads;
        for (int li : out_links[n])
            heads.push_back(links[li].head);
        std::sort(heads.begin(), heads.end());
        if (std::adjacent_find(heads.begin(), heads.end()) != heads.end())
            throw ValidationError("parallel links leaving node " + std::to_string(n));
    }
    std::sort(origins.begin(), origins.end());
    origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
    std::sort(destinations.begin(), destinations.end());
    destinations.erase(std::unique(destinations.begin(), destinations.end()), destinations.end());
}

int Network::find_link(int tail, int head) const
{
    if (tail < 1 || tail >= static_cast<int>(out_links.size()))
        return -1;
    for (int li : out_links[tail])
        if (links[li].head == head)
            return li;
    return -1;
}

bool same_topology(const Network& a, const Network& b)
{
    return a.node_count == b.node_count && a.first_thru_node == b.first_thru_node && a.links == b.links;
}

std::string to_string(const OD& od)
{
    return "(" + std::to_string(od.o) + "," + std::to_string(od.d) + ")";
}

double DemandTable::total() const
{
    double s = 0.0;
    for (const auto& [od, q] : entries)
        s += q;
    return s;
}

Network parse_tntp_network(std::istream& in)
{
    Network net;
    int declared_nodes = -1;
    int declared_links = -1;
    bool in_body = false;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (!in_body) {
            std::string key, value;
            if (parse_metadata(line, key, value)) {
                if (key == "END OF METADATA")
                    in_body = true;
                else if (key == "NUMBER OF NODES")
                    declared_nodes = to_int(value, lineno);
                else if (key == "NUMBER OF LINKS")
                    declared_links = to_int(value, lineno);
                else if (key == "NUMBER OF ZONES")
                    net.zone_count = to_int(value, lineno);
                else if (key == "FIRST THRU NODE")
                    net.first_thru_node = to_int(value, lineno);
                continue;
            }
            if (trim(strip_comment(line)).empty())
                continue;
            // Files without a metadata block start directly with link rows.
            in_body = true;
        }
        line = trim(strip_comment(line));
        if (line.empty())
            continue;
        if (!line.empty() && line.back() == ';')
            line.pop_back();
        std::istringstream row(line);
        std::vector<std::string> fields;
        for (std::string tok; row >> tok;)
            fields.push_back(tok);
        if (fields.size() < 5)
            throw ParseError("link row needs at least 5 fields, found " + std::to_string(fields.size()), lineno);
        Link l;
        l.tail = to_int(fields[0], lineno);
        l.head = to_int(fields[1], lineno);
        l.capacity = to_double(fields[2], lineno);
        l.length = to_double(fields[3], lineno);
        l.free_flow_time = to_double(fields[4], lineno);
        if (fields.size() > 5)
            l.bpr_alpha = to_double(fields[5], lineno);
        if (fields.size() > 6)
            l.bpr_beta = to_double(fields[6], lineno);
        if (fields.size() > 7)
            l.speed = to_double(fields[7], lineno);
        if (fields.size() > 8)
            l.toll = to_double(fields[8], lineno);
        if (fields.size() > 9)
            l.type = to_int(fields[9], lineno);
        if (!(l.capacity > 0.0))
            throw ValidationError("line " + std::to_string(lineno) + ": zero or negative capacity");
        net.links.push_back(l);
    }
    if (declared_nodes > 0)
        net.node_count = declared_nodes;
    if (declared_links >= 0 && declared_links != net.link_count())
        std::cerr << "warning: header declares " << declared_links << " links, file has " << net.link_count()
                  << "\n";
    net.finalize();
    return net;
}

Network load_tntp_network(const std::string& path)
{
    auto in = open_or_throw(path);
    return parse_tntp_network(in);
}

std::string write_tntp_network(const Network& net)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "<NUMBER OF ZONES> " << net.zone_count << "\n";
    out << "<NUMBER OF NODES> " << net.node_count << "\n";
    out << "<FIRST THRU NODE> " << net.first_thru_node << "\n";
    out << "<NUMBER OF LINKS> " << net.link_count() << "\n";
    out << "<END OF METADATA>\n\n";
    out << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
    for (const Link& l : net.links) {
        out << '\t' << l.tail << '\t' << l.head << '\t' << l.capacity << '\t' << l.length << '\t'
            << l.free_flow_time << '\t' << l.bpr_alpha << '\t' << l.bpr_beta << '\t' << l.speed << '\t' << l.toll
            << '\t' << l.type << "\t;\n";
    }
    return out.str();
}

DemandTable parse_tntp_trips(std::istream& in, double* dropped_intrazonal)
{
    DemandTable table;
    double dropped = 0.0;
    int origin = -1;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        std::string key, value;
        if (parse_metadata(line, key, value))
            continue;
        line = trim(strip_comment(line));
        if (line.empty())
            continue;
        if (line.rfind("Origin", 0) == 0) {
            origin = to_int(trim(line.substr(6)), lineno);
            continue;
        }
        if (origin < 0)
            throw ParseError("destination entries before any 'Origin' line", lineno);
        std::istringstream entries(line);
        for (std::string item; std::getline(entries, item, ';');) {
            item = trim(item);
            if (item.empty())
                continue;
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw ParseError("expected 'destination : flow', got '" + item + "'", lineno);
            const int dest = to_int(trim(item.substr(0, colon)), lineno);
            const double q = to_double(trim(item.substr(colon + 1)), lineno);
            if (q < 0.0)
                throw ValidationError("line " + std::to_string(lineno) + ": negative demand "
                                      + to_string(OD{origin, dest}));
            if (q == 0.0)
                continue;
            if (dest == origin) {
                dropped += q;
                continue;
            }
            table.entries[OD{origin, dest}] += q;
        }
    }
    if (dropped > 0.0)
        std::cerr << "warning: dropped " << dropped << " intra-zonal trips\n";
    if (dropped_intrazonal)
        *dropped_intrazonal = dropped;
    return table;
}

DemandTable load_tntp_trips(const std::string& path, double* dropped_intrazonal)
{
    auto in = open_or_throw(path);
    return parse_tntp_trips(in, dropped_intrazonal);
}

const char* mode_name(Mode m)
{
    switch (m) {
    case Mode::DA:
        return "DA";
    case Mode::RD:
        return "RD";
    case Mode::RP:
        return "RP";
    case Mode::PT:
        return "PT";
    }
    throw ContractError("unknown mode");
}

Mode parse_mode(const std::string& s)
{
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "DA")
        return Mode::DA;
    if (u == "RD")
        return Mode::RD;
    if (u == "RP")
        return Mode::RP;
    if (u == "PT")
        return Mode::PT;
    throw ParseError("unknown mode '" + s + "'", 0);
}

double ModalDemandTable::total() const
{
    double s = 0.0;
    for (const auto& [od, v] : entries)
        for (double q : v)
            s += q;
    return s;
}

ModalDemandTable parse_modal_demand_csv(std::istream& in)
{
    ModalDemandTable table;
    std::string raw;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("origin", 0) == 0)
                continue;
        }
        std::vector<std::string> cells;
        std::istringstream row(line);
        for (std::string c; std::getline(row, c, ',');)
            cells.push_back(trim(c));
        if (cells.size() != 4)
            throw ParseError("expected origin,destination,mode,demand", lineno);
        const OD od{to_int(cells[0], lineno), to_int(cells[1], lineno)};
        Mode m;
        try {
            m = parse_mode(cells[2]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        }
        const double q = to_double(cells[3], lineno);
        if (q < 0.0)
            throw ValidationError("line " + std::to_string(lineno) + ": negative demand");
        if (od.o == od.d)
            throw ValidationError("line " + std::to_string(lineno) + ": intra-zonal modal demand");
        auto& slot = table.entries[od];
        slot[static_cast<int>(m)] += q;
    }
    return table;
}

ModalDemandTable load_modal_demand_csv(const std::string& path)
{
    auto in = open_or_throw(path);
    return parse_modal_demand_csv(in);
}

double link_travel_time(const Link& link, double vehicular_flow)
{
    require(vehicular_flow >= 0.0, "link_travel_time: negative flow");
    const double ratio = vehicular_flow / link.capacity;
    return link.free_flow_time * (1.0 + link.bpr_alpha * std::pow(ratio, link.bpr_beta));
}

double link_travel_time_derivative(const Link& link, double vehicular_flow)
{
    require(vehicular_flow >= 0.0, "link_travel_time_derivative: negative flow");
    if (vehicular_flow == 0.0)
        return link.bpr_beta == 1.0 ? link.free_flow_time * link.bpr_alpha / link.capacity : 0.0;
    const double ratio = vehicular_flow / link.capacity;
    return link.free_flow_time * link.bpr_alpha * link.bpr_beta * std::pow(ratio, link.bpr_beta - 1.0)
        / link.capacity;
}

const char* link_class_name(LinkClass c)
{
    switch (c) {
    case LinkClass::DA:
        return "DA";
    case LinkClass::RDEmpty:
        return "RD-empty";
    case LinkClass::RDLoaded:
        return "RD-loaded";
    case LinkClass::RP:
        return "RP";
    case LinkClass::PT:
        return "PT";
    }
    throw ContractError("unknown link class");
}

ClassCoeffs CostModel::coeffs(LinkClass c) const
{
    switch (c) {
    case LinkClass::DA: {
        const auto& p = params(Mode::DA);
        return {p.alpha, p.beta, p.fixed};
    }
    case LinkClass::RDEmpty: {
        const auto& p = params(Mode::RD);
        return {p.alpha, p.beta, p.fixed};
    }
    case LinkClass::RDLoaded: {
        const auto& p = params(Mode::RD);
        return {p.alpha + p.tau_t - p.nu_t, p.beta + p.tau_d - p.nu_d, p.fixed_loaded};
    }
    case LinkClass::RP: {
        const auto& p = params(Mode::RP);
        return {p.alpha + p.tau_t + p.nu_t, p.tau_d + p.nu_d, p.fixed};
    }
    case LinkClass::PT: {
        const auto& p = params(Mode::PT);
        return {p.alpha + p.tau_t + p.nu_t, p.tau_d + p.nu_d, p.fixed};
    }
    }
    throw ContractError("unknown link class");
}

double CostModel::pt_link_time(const Link& link, double road_time) const
{
    return pt_time_factor * (pt_time == PtTimeSource::Road ? road_time : link.free_flow_time);
}

void CostModel::validate() const
{
    for (int m = 0; m < kModeCount; ++m) {
        const auto& p = mode[m];
        for (double v : {p.alpha, p.beta, p.tau_t, p.tau_d, p.nu_t, p.nu_d, p.fixed, p.fixed_loaded})
            if (v < 0.0 || !std::isfinite(v))
                throw ValidationError(std::string("mode ") + mode_name(static_cast<Mode>(m))
                                      + ": cost coefficients must be finite and non-negative");
    }
    if (!(pt_time_factor > 0.0))
        throw ValidationError("pt_time_factor must be positive");
    if (!(pt_pce > 0.0))
        throw ValidationError("pt_pce must be positive");
}

CostModel default_cost_model()
{
    CostModel m;
    m.params(Mode::DA) = {1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    m.params(Mode::RD) = {1.0, 1.0, 0.3, 0.2, 0.3, 0.7, 0.0, 0.0};
    m.params(Mode::RP) = {0.6, 0.0, 0.3, 0.1, 0.1, 0.4, 0.0, 0.0};
    m.params(Mode::PT) = {0.4, 0.0, 0.6, 0.6, 0.0, 0.4, 0.0, 0.0};
    return m;
}

double class_link_cost(const Link& link, LinkClass cls, double time, const CostModel& model)
{
    const double t = cls == LinkClass::PT ? model.pt_link_time(link, time) : time;
    return model.coeffs(cls)(t, link.length);
}

std::vector<int> ShortestPathTree::path_to(const Network& net, int node) const
{
    std::vector<int> path;
    if (node < 1 || node >= static_cast<int>(dist.size()) || !std::isfinite(dist[node]))
        return path;
    for (int v = node; v != root;) {
        const int li = pred[v];
        require(li >= 0, "ShortestPathTree::path_to: broken predecessor chain");
        path.push_back(li);
        v = net.links[li].tail;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

ShortestPathTree dijkstra(const Network& net, int root, const std::vector<double>& link_cost)
{
    require(root >= 1 && root <= net.node_count, "dijkstra: root out of range");
    require(static_cast<int>(link_cost.size()) == net.link_count(), "dijkstra: cost vector size mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();
    ShortestPathTree tree;
    tree.root = root;
    tree.dist.assign(net.node_count + 1, inf);
    tree.pred.assign(net.node_count + 1, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    tree.dist[root] = 0.0;
    heap.push({0.0, root});
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > tree.dist[u])
            continue;
        // Zone centroids that are not thru nodes only start and end paths.
        if (u != root && !net.is_thru(u))
            continue;
        for (int li : net.out_links[u]) {
            require(link_cost[li] >= 0.0, "dijkstra: negative link cost");
            const int v = net.links[li].head;
            const double nd = d + link_cost[li];
            if (nd < tree.dist[v] || (nd == tree.dist[v] && tree.pred[v] >= 0 && li < tree.pred[v])) {
                const bool improved = nd < tree.dist[v];
                tree.dist[v] = nd;
                tree.pred[v] = li;
                if (improved)
                    heap.push({nd, v});
            }
        }
    }
    return tree;
}

SkimMatrix free_flow_skims(const Network& net)
{
    SkimMatrix skim;
    skim.n = net.node_count;
    const std::size_t side = static_cast<std::size_t>(net.node_count) + 1;
    skim.time.assign(side * side, std::numeric_limits<double>::infinity());
    skim.length.assign(side * side, std::numeric_limits<double>::infinity());
    std::vector<double> fftt(net.link_count()), len(net.link_count());
    for (int i = 0; i < net.link_count(); ++i) {
        fftt[i] = net.links[i].free_flow_time;
        len[i] = net.links[i].length;
    }
    for (int o = 1; o <= net.node_count; ++o) {
        const auto tt = dijkstra(net, o, fftt);
        const auto ll = dijkstra(net, o, len);
        for (int d = 1; d <= net.node_count; ++d) {
            skim.time[o * side + d] = tt.dist[d];
            skim.length[o * side + d] = ll.dist[d];
        }
    }
    return skim;
}

} // namespace seqbush
