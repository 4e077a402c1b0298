#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vvc/grid_model.hpp"
#include "vvc/power_flow.hpp"

namespace vvc {

enum class EventTarget { Load, Generator };

enum class EventKind {
    Scale,       // load P and Q set to (1 + value) x their initial values
    Set,         // generator active power set to value MW; for loads, P set to value MW at constant pf
    Disconnect,  // load P and Q set to zero
    SetReactive  // generator exogenous reactive offset set to value Mvar
};

struct Event {
    double time_s = 0.0;
    EventTarget target = EventTarget::Load;
    std::string id;
    EventKind kind = EventKind::Scale;
    double value = 0.0;
};

/// Time-ordered list of perturbations. Construction sorts by time (stable) and validates.
class EventSchedule {
public:
    EventSchedule() = default;
    explicit EventSchedule(std::vector<Event> events);

    const std::vector<Event>& events() const { return events_; }
    bool empty() const { return events_.empty(); }
    double last_time() const { return events_.empty() ? 0.0 : events_.back().time_s; }

private:
    std::vector<Event> events_;
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view s);

/// +1: a power factor below one makes the DG absorb reactive power (under-excited).
enum class ReactiveSign { Absorb = 1, Inject = -1 };

struct PlantConfig {
    double sample_time_s = 2.0;
    double v_hv_pu = 1.0;  // upstream HV voltage seen through the OLTC ratio
    double avr_tau_s = 6.0;
    std::vector<double> avr_tau_per_dg;  // optional override, one entry per generator
    ReactiveSign reactive_sign = ReactiveSign::Absorb;
    int initial_tap = 0;
    int tap_min = -6;
    int tap_max = 6;
    double tap_step = 0.015;
    double pf_min = 0.6;
    /// Clamp reactive references to the machine capability sqrt(S^2 - p^2), with the
    /// apparent-power rating S taken as the generator's nominal power.
    bool reactive_capability_limit = false;
    PowerFlowOptions power_flow{};
    std::vector<std::string> controlled_buses{"N03", "N06", "N11", "N14", "N18", "N19",
                                              "N21", "N23", "N27", "N28", "N32"};
};

/// Raised when the power flow fails inside a plant step; carries a state dump.
class PlantDiverged : public std::runtime_error {
public:
    PlantDiverged(const std::string& what, std::string dump)
        : std::runtime_error(what), dump_(std::move(dump)) {}
    const std::string& dump() const { return dump_; }

private:
    std::string dump_;
};

struct Measurements {
    int step = 0;
    double time_s = 0.0;
    std::vector<double> v_controlled;  // |V| at the controlled buses, p.u.
    std::vector<double> dg_p;          // active power per DG, p.u.
    std::vector<double> dg_q;          // delivered reactive power per DG (lag state + offset), p.u.
    std::vector<double> dg_q_offset;   // exogenous reactive offset per DG, p.u.
    int tap = 0;
    std::vector<std::size_t> events_applied;  // schedule indices applied during the last step
};

/// q = -sign * p * tan(acos(pf)).
double reactive_reference(double p, double pf, ReactiveSign sign);
/// Largest |q| a generator rated s_rated can deliver at active power p.
double reactive_capability(double p, double s_rated);

/// Quasi-static network plant sampled every T seconds. Value type: copies are
/// independent simulations sharing the immutable network.
class Plant {
public:
    Plant(std::shared_ptr<const NetworkModel> model, OperatingPoint op, PlantConfig cfg = {},
          EventSchedule events = {});

    const PlantConfig& config() const { return cfg_; }
    const NetworkModel& model() const { return *model_; }
    const PerUnitNetwork& network() const { return *net_; }
    OperatingPoint operating_point() const { return op_; }

    std::size_t generator_count() const { return dg_p_.size(); }
    int step_index() const { return k_; }
    double time_s() const { return k_ * cfg_.sample_time_s; }
    int tap() const { return tap_; }
    /// Busbar voltage for the current tap: v_hv / (1 + step * tap).
    double slack_voltage() const;
    double avr_lag(std::size_t dg) const { return lag_[dg]; }
    double generator_reactive_state(std::size_t dg) const { return dg_q_[dg]; }
    const VoltageSolution& solution() const { return solution_; }
    bool has_pending_events() const { return next_event_ < events_.events().size(); }

    Measurements measure() const;

    /// Advances one sample: reactive references from the power factors, AVR lag update,
    /// due events, tap command with saturation, power flow.
    Measurements step(std::span<const double> pf_refs, int tap_cmd);

    /// Steps with frozen inputs until the largest voltage change between samples drops below
    /// tol. Returns the number of steps after which the state stopped changing.
    int run_to_steady_state(std::span<const double> pf_refs, int max_steps, double tol = 1e-9);

    /// Additive offset on a generator's active and exogenous reactive power (p.u.).
    void perturb_generator(std::size_t dg, double dp, double dq);

    std::string dump() const;

private:
    void apply_event(const Event& e);
    void solve_network();

    std::shared_ptr<const NetworkModel> model_;
    std::shared_ptr<const PerUnitNetwork> net_;
    OperatingPoint op_;
    PlantConfig cfg_;
    EventSchedule events_;
    std::size_t next_event_ = 0;

    std::vector<Complex> load_s0_;  // initial demand per load, p.u.
    std::vector<Complex> load_s_;   // current demand per load, p.u.
    std::vector<double> dg_p_;
    std::vector<double> dg_q_;         // AVR lag state
    std::vector<double> dg_q_offset_;  // exogenous reactive offset
    std::vector<double> lag_;          // exp(-T / tau) per DG
    std::vector<std::size_t> controlled_nodes_;
    int tap_ = 0;
    int k_ = 0;
    std::vector<std::size_t> last_events_;
    VoltageSolution solution_;
};

}  // namespace vvc
