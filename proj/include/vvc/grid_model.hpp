#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vvc {

using Complex = std::complex<double>;

/// Raised when the network file cannot be parsed. Carries the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when a parsed network violates a structural or physical invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The four tabulated load/generation snapshots.
enum class OperatingPoint { Am1 = 0, Am7 = 1, Pm1 = 2, Pm7 = 3 };
inline constexpr std::size_t kOperatingPointCount = 4;

std::string_view to_string(OperatingPoint op);
/// Accepts "1am", "7am", "1pm", "7pm". Throws std::invalid_argument otherwise.
OperatingPoint parse_operating_point(std::string_view label);

template <class T>
using PerOperatingPoint = std::array<T, kOperatingPointCount>;

enum class BusKind { Substation, Mv };

struct Bus {
    std::string id;
    int feeder = 0;  // 0 for the substation busbar
    BusKind kind = BusKind::Mv;
};

enum class LineKind { Cable, Overhead };

struct LineType {
    std::string name;
    LineKind kind = LineKind::Cable;
    double section_mm2 = 0.0;
    double r_ohm_per_km = 0.0;
    double l_mh_per_km = 0.0;
    double c_uf_per_km = 0.0;
};

struct Branch {
    std::string name;
    std::string from;
    std::string to;
    std::string type;
    double length_km = 0.0;
    int feeder = 0;
};

struct TransformerType {
    std::string name;
    double rated_mva = 0.0;
    double copper_loss_kw = 0.0;
    double short_circuit_pct = 0.0;
    int tap_count = 0;
    double tap_step_pct = 0.0;

    /// Series resistance in p.u. of the transformer's own rating.
    double r_own_pu() const { return copper_loss_kw / (rated_mva * 1000.0); }
    /// Series reactance in p.u. of the transformer's own rating.
    double x_own_pu() const;
};

struct Transformer {
    std::string name;
    std::string type;
    std::string placement;  // substation bus id, or the LV load id it supplies
};

struct LoadRecord {
    std::string id;
    std::string bus;
    std::string category;  // e.g. "I-MV", "R-LV"
    PerOperatingPoint<double> p_mw{};
    PerOperatingPoint<double> q_mvar{};

    bool is_lv() const;
};

struct GeneratorRecord {
    std::string id;
    std::string tech;  // TG | PV | AE
    int feeder = 0;
    std::string bus;
    double p_nominal_mw = 0.0;
    PerOperatingPoint<double> p_mw{};
};

struct SystemBase {
    double s_base_mva = 50.0;
    double v_base_kv = 20.0;
    double f_hz = 50.0;

    double z_base_ohm() const { return v_base_kv * v_base_kv / s_base_mva; }
};

/// Validated radial network in engineering units, as read from the network file.
class NetworkModel {
public:
    SystemBase base;
    std::vector<Bus> buses;
    std::vector<LineType> line_types;
    std::vector<Branch> branches;
    std::vector<TransformerType> transformer_types;
    std::vector<Transformer> transformers;
    std::vector<LoadRecord> loads;
    std::vector<GeneratorRecord> generators;

    std::optional<std::size_t> bus_index(std::string_view id) const;
    std::optional<std::size_t> load_index(std::string_view id) const;
    std::optional<std::size_t> generator_index(std::string_view id) const;
    const LineType& line_type(std::string_view name) const;
    const TransformerType& transformer_type(std::string_view name) const;
    /// Transformer whose placement is the given LV load, if any.
    const Transformer* transformer_for_load(std::string_view load_id) const;
    const Bus& substation() const;

    /// Sum of branch lengths belonging to the given feeder.
    double feeder_length_km(int feeder) const;

    /// Checks every invariant; throws ValidationError naming the first violation.
    void validate() const;
};

NetworkModel parse_network(std::string_view text);
NetworkModel load_network(const std::filesystem::path& path);
/// Renders the model back to the file format. Numbers use shortest round-trip form.
std::string serialize_network(const NetworkModel& model);

/// Node of the per-unit solver tree. LV nodes are internal points behind an MV/LV transformer.
struct PuNode {
    std::string id;
    std::size_t parent = 0;  // index into nodes; the root points at itself
    Complex z_series{};      // impedance of the edge to the parent
    double b_shunt = 0.0;    // total shunt susceptance lumped at the node
    bool is_lv = false;
    std::size_t bus = 0;     // owning MV bus index in NetworkModel::buses
};

/// Per-unit solver representation. Node 0 is the substation; nodes are in BFS order
/// so that every parent precedes its children.
struct PerUnitNetwork {
    SystemBase base;
    std::vector<PuNode> nodes;
    std::vector<std::size_t> bus_node;   // MV bus index -> node index
    std::vector<std::size_t> load_node;  // load index -> node index where its power is drawn

    std::size_t size() const { return nodes.size(); }
    std::optional<std::size_t> node_index(std::string_view id) const;
};

PerUnitNetwork to_per_unit(const NetworkModel& model);

/// Series impedance of a line in p.u.
Complex line_impedance_pu(const LineType& type, double length_km, const SystemBase& base);
/// Total shunt susceptance of a line in p.u.
double line_susceptance_pu(const LineType& type, double length_km, const SystemBase& base);
/// Series impedance of a transformer on the system base.
Complex transformer_impedance_pu(const TransformerType& type, const SystemBase& base);

/// Complex power injections (p.u., generation positive) at each solver node.
struct InjectionSet {
    std::vector<Complex> s;

    explicit InjectionSet(std::size_t n = 0) : s(n) {}
    std::size_t size() const { return s.size(); }
};

/// Loads drawn and generator active power injected at their tabulated values, all DG
/// reactive power zero.
InjectionSet operating_point(const NetworkModel& model, const PerUnitNetwork& net, OperatingPoint op);

}  // namespace vvc
