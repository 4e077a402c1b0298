#include "vvc/grid_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "vvc/number_format.hpp"

namespace vvc {

std::string_view to_string(OperatingPoint op) {
    switch (op) {
        case OperatingPoint::Am1: return "1am";
        case OperatingPoint::Am7: return "7am";
        case OperatingPoint::Pm1: return "1pm";
        case OperatingPoint::Pm7: return "7pm";
    }
    return "?";
}

OperatingPoint parse_operating_point(std::string_view label) {
    if (label == "1am") return OperatingPoint::Am1;
    if (label == "7am") return OperatingPoint::Am7;
    if (label == "1pm") return OperatingPoint::Pm1;
    if (label == "7pm") return OperatingPoint::Pm7;
    throw std::invalid_argument("unknown operating point '" + std::string(label) + "'");
}

double TransformerType::x_own_pu() const {
    const double z = short_circuit_pct / 100.0;
    const double r = r_own_pu();
    return std::sqrt(z * z - r * r);
}

bool LoadRecord::is_lv() const {
    return category.size() >= 2 && category.substr(category.size() - 2) == "LV";
}

namespace {

template <class T>
std::optional<std::size_t> find_by_id(const std::vector<T>& items, std::string_view id) {
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].id == id) return i;
    return std::nullopt;
}

template <class T>
const T* find_by_name(const std::vector<T>& items, std::string_view name) {
    for (const auto& item : items)
        if (item.name == name) return &item;
    return nullptr;
}

}  // namespace

std::optional<std::size_t> NetworkModel::bus_index(std::string_view id) const { return find_by_id(buses, id); }
std::optional<std::size_t> NetworkModel::load_index(std::string_view id) const { return find_by_id(loads, id); }
std::optional<std::size_t> NetworkModel::generator_index(std::string_view id) const {
    return find_by_id(generators, id);
}

const LineType& NetworkModel::line_type(std::string_view name) const {
    if (const auto* t = find_by_name(line_types, name)) return *t;
    throw ValidationError("unknown line type '" + std::string(name) + "'");
}

const TransformerType& NetworkModel::transformer_type(std::string_view name) const {
    if (const auto* t = find_by_name(transformer_types, name)) return *t;
    throw ValidationError("unknown transformer type '" + std::string(name) + "'");
}

const Transformer* NetworkModel::transformer_for_load(std::string_view load_id) const {
    for (const auto& t : transformers)
        if (t.placement == load_id) return &t;
    return nullptr;
}

const Bus& NetworkModel::substation() const {
    for (const auto& b : buses)
        if (b.kind == BusKind::Substation) return b;
    throw ValidationError("network has no substation bus");
}

double NetworkModel::feeder_length_km(int feeder) const {
    double total = 0.0;
    for (const auto& br : branches)
        if (br.feeder == feeder) total += br.length_km;
    return total;
}

void NetworkModel::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ValidationError(msg);
    };
    auto unique_ids = [&](const auto& items, const char* what, auto key) {
        std::set<std::string> seen;
        for (const auto& it : items)
            require(seen.insert(key(it)).second, std::string("duplicate ") + what + " '" + key(it) + "'");
    };
    unique_ids(buses, "bus id", [](const Bus& b) { return b.id; });
    unique_ids(branches, "branch name", [](const Branch& b) { return b.name; });
    unique_ids(loads, "load id", [](const LoadRecord& l) { return l.id; });
    unique_ids(generators, "generator id", [](const GeneratorRecord& g) { return g.id; });
    unique_ids(line_types, "line type", [](const LineType& t) { return t.name; });
    unique_ids(transformer_types, "transformer type", [](const TransformerType& t) { return t.name; });

    require(base.s_base_mva > 0 && base.v_base_kv > 0 && base.f_hz > 0, "system base values must be positive");

    const auto n_sub = std::count_if(buses.begin(), buses.end(),
                                     [](const Bus& b) { return b.kind == BusKind::Substation; });
    require(n_sub == 1, "exactly one substation bus required, found " + std::to_string(n_sub));

    for (const auto& t : line_types)
        require(t.r_ohm_per_km >= 0 && t.l_mh_per_km >= 0 && t.c_uf_per_km >= 0,
                "line type '" + t.name + "' has negative constants");

    for (const auto& br : branches) {
        require(bus_index(br.from).has_value(), "branch '" + br.name + "' references unknown bus '" + br.from + "'");
        require(bus_index(br.to).has_value(), "branch '" + br.name + "' references unknown bus '" + br.to + "'");
        require(br.from != br.to, "branch '" + br.name + "' is a self loop");
        require(br.length_km > 0, "branch '" + br.name + "' must have positive length");
        line_type(br.type);
    }

    // Radiality: union-find detects cycles, edge count detects disconnection.
    std::vector<std::size_t> parent(buses.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& br : branches) {
        const auto a = find(*bus_index(br.from));
        const auto b = find(*bus_index(br.to));
        require(a != b, "radiality violated: branch '" + br.name + "' closes a cycle");
        parent[a] = b;
    }
    require(branches.size() + 1 == buses.size(),
            "radiality violated: " + std::to_string(buses.size()) + " buses need " +
                std::to_string(buses.size() - 1) + " branches, found " + std::to_string(branches.size()));

    for (const auto& t : transformer_types) {
        require(t.rated_mva > 0, "transformer type '" + t.name + "' needs a positive rating");
        const double z = t.short_circuit_pct / 100.0;
        require(z > t.r_own_pu(), "transformer type '" + t.name + "' has |Z| <= R");
        require(t.tap_count >= 0 && t.tap_step_pct >= 0, "transformer type '" + t.name + "' has negative tap data");
    }
    for (const auto& tr : transformers) {
        transformer_type(tr.type);
        require(bus_index(tr.placement).has_value() || load_index(tr.placement).has_value(),
                "transformer '" + tr.name + "' placement '" + tr.placement + "' is neither a bus nor a load");
    }

    for (const auto& l : loads) {
        require(bus_index(l.bus).has_value(), "load '" + l.id + "' references unknown bus '" + l.bus + "'");
        for (std::size_t op = 0; op < kOperatingPointCount; ++op)
            require(l.p_mw[op] >= 0 && l.q_mvar[op] >= 0, "load '" + l.id + "' has negative demand");
        if (l.is_lv())
            require(transformer_for_load(l.id) != nullptr, "LV load '" + l.id + "' has no supplying transformer");
    }

    for (const auto& g : generators) {
        require(bus_index(g.bus).has_value(), "generator '" + g.id + "' references unknown bus '" + g.bus + "'");
        for (std::size_t op = 0; op < kOperatingPointCount; ++op)
            require(g.p_mw[op] >= 0 && g.p_mw[op] <= g.p_nominal_mw,
                    "generator '" + g.id + "' output outside [0, nominal]");
        if (g.tech == "PV")
            require(g.p_mw[static_cast<std::size_t>(OperatingPoint::Am1)] == 0.0 &&
                        g.p_mw[static_cast<std::size_t>(OperatingPoint::Pm7)] == 0.0,
                    "PV generator '" + g.id + "' must be idle at 1am and 7pm");
    }
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Row {
    std::size_t line;
    std::vector<std::string> fields;
};

double to_double(const Row& row, std::size_t i, const char* field) {
    const auto& s = row.fields.at(i);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(row.line, std::string("field '") + field + "': expected a number, got '" + s + "'");
    return v;
}

int to_int(const Row& row, std::size_t i, const char* field) {
    const auto& s = row.fields.at(i);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(row.line, std::string("field '") + field + "': expected an integer, got '" + s + "'");
    return v;
}

void expect_fields(const Row& row, std::size_t n, const std::string& section) {
    if (row.fields.size() != n)
        throw ParseError(row.line, "section [" + section + "] expects " + std::to_string(n) + " fields, found " +
                                       std::to_string(row.fields.size()));
}

}  // namespace

NetworkModel parse_network(std::string_view text) {
    std::unordered_map<std::string, std::vector<Row>> sections;
    std::string current;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> fields;
        for (std::string tok; ls >> tok;) fields.push_back(tok);
        if (fields.empty()) continue;
        if (fields.front().front() == '[') {
            if (fields.size() != 1 || fields.front().back() != ']')
                throw ParseError(line_no, "malformed section header '" + line + "'");
            current = fields.front().substr(1, fields.front().size() - 2);
            if (sections.contains(current)) throw ParseError(line_no, "duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        if (current.empty()) throw ParseError(line_no, "data before the first section header");
        sections[current].push_back({line_no, std::move(fields)});
    }

    static const std::set<std::string> known = {"system", "buses", "line_types", "branches",
                                                "transformer_types", "transformers", "loads", "generators"};
    for (const auto& [name, rows] : sections)
        if (!known.contains(name))
            throw ParseError(rows.empty() ? 0 : rows.front().line, "unknown section [" + name + "]");
    for (const auto& name : known)
        if (!sections.contains(name)) throw ParseError(line_no, "missing section [" + name + "]");

    NetworkModel m;
    for (const auto& row : sections["system"]) {
        expect_fields(row, 2, "system");
        const auto& key = row.fields[0];
        const double v = to_double(row, 1, key.c_str());
        if (key == "s_base_mva") m.base.s_base_mva = v;
        else if (key == "v_base_kv") m.base.v_base_kv = v;
        else if (key == "f_hz") m.base.f_hz = v;
        else throw ParseError(row.line, "unknown system key '" + key + "'");
    }
    for (const auto& row : sections["buses"]) {
        expect_fields(row, 3, "buses");
        Bus b{row.fields[0], to_int(row, 1, "feeder"), BusKind::Mv};
        if (row.fields[2] == "substation") b.kind = BusKind::Substation;
        else if (row.fields[2] != "mv") throw ParseError(row.line, "field 'kind': expected substation|mv");
        m.buses.push_back(std::move(b));
    }
    for (const auto& row : sections["line_types"]) {
        expect_fields(row, 6, "line_types");
        LineType t;
        t.name = row.fields[0];
        if (row.fields[1] == "cable") t.kind = LineKind::Cable;
        else if (row.fields[1] == "overhead") t.kind = LineKind::Overhead;
        else throw ParseError(row.line, "field 'kind': expected cable|overhead");
        t.section_mm2 = to_double(row, 2, "section_mm2");
        t.r_ohm_per_km = to_double(row, 3, "r_ohm_per_km");
        t.l_mh_per_km = to_double(row, 4, "l_mh_per_km");
        t.c_uf_per_km = to_double(row, 5, "c_uf_per_km");
        m.line_types.push_back(std::move(t));
    }
    for (const auto& row : sections["branches"]) {
        expect_fields(row, 6, "branches");
        m.branches.push_back({row.fields[0], row.fields[1], row.fields[2], row.fields[3],
                              to_double(row, 4, "length_km"), to_int(row, 5, "feeder")});
    }
    for (const auto& row : sections["transformer_types"]) {
        expect_fields(row, 6, "transformer_types");
        m.transformer_types.push_back({row.fields[0], to_double(row, 1, "rated_mva"),
                                       to_double(row, 2, "copper_loss_kw"), to_double(row, 3, "short_circuit_pct"),
                                       to_int(row, 4, "tap_count"), to_double(row, 5, "tap_step_pct")});
    }
    for (const auto& row : sections["transformers"]) {
        expect_fields(row, 3, "transformers");
        m.transformers.push_back({row.fields[0], row.fields[1], row.fields[2]});
    }
    for (const auto& row : sections["loads"]) {
        expect_fields(row, 3 + 2 * kOperatingPointCount, "loads");
        LoadRecord l{row.fields[0], row.fields[1], row.fields[2], {}, {}};
        for (std::size_t op = 0; op < kOperatingPointCount; ++op) {
            l.p_mw[op] = to_double(row, 3 + 2 * op, "p_mw");
            l.q_mvar[op] = to_double(row, 4 + 2 * op, "q_mvar");
        }
        m.loads.push_back(std::move(l));
    }
    for (const auto& row : sections["generators"]) {
        expect_fields(row, 5 + kOperatingPointCount, "generators");
        GeneratorRecord g{row.fields[0], row.fields[1], to_int(row, 2, "feeder"), row.fields[3],
                          to_double(row, 4, "p_nominal"), {}};
        for (std::size_t op = 0; op < kOperatingPointCount; ++op) g.p_mw[op] = to_double(row, 5 + op, "p_mw");
        m.generators.push_back(std::move(g));
    }

    m.validate();
    return m;
}

NetworkModel load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_network(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string serialize_network(const NetworkModel& m) {
    std::ostringstream out;
    const auto num = [](double v) { return format_double(v); };
    out << "[system]\n"
        << "s_base_mva " << num(m.base.s_base_mva) << "\n"
        << "v_base_kv " << num(m.base.v_base_kv) << "\n"
        << "f_hz " << num(m.base.f_hz) << "\n\n[buses]\n";
    for (const auto& b : m.buses)
        out << b.id << ' ' << b.feeder << ' ' << (b.kind == BusKind::Substation ? "substation" : "mv") << '\n';
    out << "\n[line_types]\n";
    for (const auto& t : m.line_types)
        out << t.name << ' ' << (t.kind == LineKind::Cable ? "cable" : "overhead") << ' ' << num(t.section_mm2) << ' '
            << num(t.r_ohm_per_km) << ' ' << num(t.l_mh_per_km) << ' ' << num(t.c_uf_per_km) << '\n';
    out << "\n[branches]\n";
    for (const auto& b : m.branches)
        out << b.name << ' ' << b.from << ' ' << b.to << ' ' << b.type << ' ' << num(b.length_km) << ' ' << b.feeder
            << '\n';
    out << "\n[transformer_types]\n";
    for (const auto& t : m.transformer_types)
        out << t.name << ' ' << num(t.rated_mva) << ' ' << num(t.copper_loss_kw) << ' ' << num(t.short_circuit_pct)
            << ' ' << t.tap_count << ' ' << num(t.tap_step_pct) << '\n';
    out << "\n[transformers]\n";
    for (const auto& t : m.transformers) out << t.name << ' ' << t.type << ' ' << t.placement << '\n';
    out << "\n[loads]\n";
    for (const auto& l : m.loads) {
        out << l.id << ' ' << l.bus << ' ' << l.category;
        for (std::size_t op = 0; op < kOperatingPointCount; ++op) out << ' ' << num(l.p_mw[op]) << ' ' << num(l.q_mvar[op]);
        out << '\n';
    }
    out << "\n[generators]\n";
    for (const auto& g : m.generators) {
        out << g.id << ' ' << g.tech << ' ' << g.feeder << ' ' << g.bus << ' ' << num(g.p_nominal_mw);
        for (double p : g.p_mw) out << ' ' << num(p);
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Per-unit conversion

Complex line_impedance_pu(const LineType& type, double length_km, const SystemBase& base) {
    const double omega = 2.0 * std::numbers::pi * base.f_hz;
    const Complex z_ohm{type.r_ohm_per_km * length_km, omega * type.l_mh_per_km * 1e-3 * length_km};
    return z_ohm / base.z_base_ohm();
}

double line_susceptance_pu(const LineType& type, double length_km, const SystemBase& base) {
    const double omega = 2.0 * std::numbers::pi * base.f_hz;
    return omega * type.c_uf_per_km * 1e-6 * length_km * base.z_base_ohm();
}

Complex transformer_impedance_pu(const TransformerType& type, const SystemBase& base) {
    // Own-base impedance rescaled to the system power base; both sides share the 20 kV voltage base.
    const double scale = base.s_base_mva / type.rated_mva;
    return Complex{type.r_own_pu(), type.x_own_pu()} * scale;
}

std::optional<std::size_t> PerUnitNetwork::node_index(std::string_view id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return i;
    return std::nullopt;
}

PerUnitNetwork to_per_unit(const NetworkModel& model) {
    PerUnitNetwork net;
    net.base = model.base;
    const std::size_t nb = model.buses.size();

    std::vector<std::vector<std::size_t>> adj(nb);  // bus -> incident branch indices
    for (std::size_t k = 0; k < model.branches.size(); ++k) {
        adj[*model.bus_index(model.branches[k].from)].push_back(k);
        adj[*model.bus_index(model.branches[k].to)].push_back(k);
    }

    net.bus_node.assign(nb, 0);
    std::vector<bool> seen(nb, false);
    const auto root = *model.bus_index(model.substation().id);
    std::queue<std::size_t> queue;
    queue.push(root);
    seen[root] = true;
    net.nodes.push_back({model.buses[root].id, 0, {}, 0.0, false, root});
    net.bus_node[root] = 0;
    while (!queue.empty()) {
        const auto bus = queue.front();
        queue.pop();
        for (const auto k : adj[bus]) {
            const auto& br = model.branches[k];
            const auto other = *model.bus_index(br.from == model.buses[bus].id ? br.to : br.from);
            if (seen[other]) continue;
            seen[other] = true;
            const auto& lt = model.line_type(br.type);
            const double b = line_susceptance_pu(lt, br.length_km, model.base);
            const auto parent_node = net.bus_node[bus];
            net.nodes[parent_node].b_shunt += 0.5 * b;
            net.bus_node[other] = net.nodes.size();
            net.nodes.push_back(
                {model.buses[other].id, parent_node, line_impedance_pu(lt, br.length_km, model.base), 0.5 * b, false, other});
            queue.push(other);
        }
    }

    net.load_node.assign(model.loads.size(), 0);
    for (std::size_t i = 0; i < model.loads.size(); ++i) {
        const auto& load = model.loads[i];
        const auto bus = *model.bus_index(load.bus);
        const auto* tr = model.transformer_for_load(load.id);
        if (!tr) {
            net.load_node[i] = net.bus_node[bus];
            continue;
        }
        const auto& tt = model.transformer_type(tr->type);
        net.load_node[i] = net.nodes.size();
        net.nodes.push_back({load.id + "_lv", net.bus_node[bus], transformer_impedance_pu(tt, model.base), 0.0, true, bus});
    }
    return net;
}

InjectionSet operating_point(const NetworkModel& model, const PerUnitNetwork& net, OperatingPoint op) {
    const auto k = static_cast<std::size_t>(op);
    const double sb = model.base.s_base_mva;
    InjectionSet inj(net.size());
    for (std::size_t i = 0; i < model.loads.size(); ++i)
        inj.s[net.load_node[i]] -= Complex{model.loads[i].p_mw[k], model.loads[i].q_mvar[k]} / sb;
    for (const auto& g : model.generators)
        inj.s[net.bus_node[*model.bus_index(g.bus)]] += Complex{g.p_mw[k] / sb, 0.0};
    return inj;
}

}  // namespace vvc
