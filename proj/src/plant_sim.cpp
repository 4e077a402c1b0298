#include "vvc/plant_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vvc {

namespace {
constexpr double kTimeEps = 1e-9;
}

EventSchedule::EventSchedule(std::vector<Event> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.time_s < b.time_s; });
    for (const auto& e : events_) {
        if (!(e.time_s >= 0.0)) throw std::invalid_argument("event time must be nonnegative");
        if (e.kind == EventKind::Scale && !(e.value > -1.0))
            throw std::invalid_argument("scale factor must exceed -1 for event on '" + e.id + "'");
        if (e.target == EventTarget::Load && e.kind == EventKind::SetReactive)
            throw std::invalid_argument("reactive offset events apply to generators only");
        if (e.target == EventTarget::Generator && (e.kind == EventKind::Scale || e.kind == EventKind::Disconnect))
            throw std::invalid_argument("generator events must be 'set' or 'set_reactive'");
    }
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Scale: return "scale";
        case EventKind::Set: return "set";
        case EventKind::Disconnect: return "disconnect";
        case EventKind::SetReactive: return "set_reactive";
    }
    return "?";
}

EventKind parse_event_kind(std::string_view s) {
    if (s == "scale") return EventKind::Scale;
    if (s == "set") return EventKind::Set;
    if (s == "disconnect") return EventKind::Disconnect;
    if (s == "set_reactive") return EventKind::SetReactive;
    throw std::invalid_argument("unknown event kind '" + std::string(s) + "'");
}

double reactive_reference(double p, double pf, ReactiveSign sign) {
    return -static_cast<double>(static_cast<int>(sign)) * p * std::tan(std::acos(pf));
}

double reactive_capability(double p, double s_rated) {
    return std::sqrt(std::max(0.0, s_rated * s_rated - p * p));
}

Plant::Plant(std::shared_ptr<const NetworkModel> model, OperatingPoint op, PlantConfig cfg, EventSchedule events)
    : model_(std::move(model)),
      net_(std::make_shared<const PerUnitNetwork>(to_per_unit(*model_))),
      op_(op),
      cfg_(std::move(cfg)),
      events_(std::move(events)),
      tap_(cfg_.initial_tap) {
    if (!(cfg_.sample_time_s > 0)) throw std::invalid_argument("sample time must be positive");
    if (cfg_.tap_min > cfg_.tap_max || tap_ < cfg_.tap_min || tap_ > cfg_.tap_max)
        throw std::invalid_argument("initial tap outside tap range");

    const auto opk = static_cast<std::size_t>(op);
    const double sb = model_->base.s_base_mva;
    for (const auto& l : model_->loads) load_s0_.emplace_back(l.p_mw[opk] / sb, l.q_mvar[opk] / sb);
    load_s_ = load_s0_;

    const auto ng = model_->generators.size();
    for (const auto& g : model_->generators) dg_p_.push_back(g.p_mw[opk] / sb);
    dg_q_.assign(ng, 0.0);
    dg_q_offset_.assign(ng, 0.0);
    if (!cfg_.avr_tau_per_dg.empty() && cfg_.avr_tau_per_dg.size() != ng)
        throw std::invalid_argument("avr_tau_per_dg must list one time constant per generator");
    for (std::size_t j = 0; j < ng; ++j) {
        const double tau = cfg_.avr_tau_per_dg.empty() ? cfg_.avr_tau_s : cfg_.avr_tau_per_dg[j];
        if (!(tau >= 0)) throw std::invalid_argument("AVR time constant must be nonnegative");
        lag_.push_back(tau == 0.0 ? 0.0 : std::exp(-cfg_.sample_time_s / tau));
    }

    for (const auto& id : cfg_.controlled_buses) {
        const auto bus = model_->bus_index(id);
        if (!bus) throw std::invalid_argument("controlled bus '" + id + "' not in network");
        controlled_nodes_.push_back(net_->bus_node[*bus]);
    }
    for (const auto& e : events_.events()) {
        const bool ok = e.target == EventTarget::Load ? model_->load_index(e.id).has_value()
                                                      : model_->generator_index(e.id).has_value();
        if (!ok) throw std::invalid_argument("event references unknown element '" + e.id + "'");
    }
    solve_network();
}

double Plant::slack_voltage() const { return cfg_.v_hv_pu / (1.0 + cfg_.tap_step * tap_); }

void Plant::solve_network() {
    InjectionSet inj(net_->size());
    for (std::size_t i = 0; i < load_s_.size(); ++i) inj.s[net_->load_node[i]] -= load_s_[i];
    for (std::size_t j = 0; j < dg_p_.size(); ++j) {
        const auto node = net_->bus_node[*model_->bus_index(model_->generators[j].bus)];
        inj.s[node] += Complex{dg_p_[j], dg_q_[j] + dg_q_offset_[j]};
    }
    try {
        solution_ = solve(*net_, inj, Complex{slack_voltage(), 0.0}, cfg_.power_flow);
    } catch (const std::exception& e) {
        throw PlantDiverged(std::string("plant step failed: ") + e.what(), dump());
    }
}

Measurements Plant::measure() const {
    Measurements m;
    m.step = k_;
    m.time_s = time_s();
    for (const auto node : controlled_nodes_) m.v_controlled.push_back(std::abs(solution_.v[node]));
    m.dg_p = dg_p_;
    m.dg_q.resize(dg_q_.size());
    for (std::size_t j = 0; j < dg_q_.size(); ++j) m.dg_q[j] = dg_q_[j] + dg_q_offset_[j];
    m.dg_q_offset = dg_q_offset_;
    m.tap = tap_;
    m.events_applied = last_events_;
    return m;
}

Measurements Plant::step(std::span<const double> pf_refs, int tap_cmd) {
    if (pf_refs.size() != dg_p_.size()) throw std::invalid_argument("one power factor per generator required");
    for (double pf : pf_refs)
        if (!(pf >= cfg_.pf_min && pf <= 1.0)) throw std::invalid_argument("power factor reference outside [pf_min, 1]");
    if (tap_cmd < -1 || tap_cmd > 1) throw std::invalid_argument("tap command must be -1, 0 or +1");

    for (std::size_t j = 0; j < dg_p_.size(); ++j) {
        double q_ref = reactive_reference(dg_p_[j], pf_refs[j], cfg_.reactive_sign);
        if (cfg_.reactive_capability_limit) {
            const double q_max = reactive_capability(dg_p_[j], model_->generators[j].p_nominal_mw / model_->base.s_base_mva);
            q_ref = std::clamp(q_ref, -q_max, q_max);
        }
        dg_q_[j] = lag_[j] * dg_q_[j] + (1.0 - lag_[j]) * q_ref;
    }

    ++k_;
    last_events_.clear();
    const double t = time_s();
    while (next_event_ < events_.events().size() && events_.events()[next_event_].time_s <= t + kTimeEps) {
        apply_event(events_.events()[next_event_]);
        last_events_.push_back(next_event_);
        ++next_event_;
    }

    tap_ = std::clamp(tap_ + tap_cmd, cfg_.tap_min, cfg_.tap_max);
    solve_network();
    return measure();
}

void Plant::apply_event(const Event& e) {
    const double sb = model_->base.s_base_mva;
    if (e.target == EventTarget::Load) {
        const auto i = *model_->load_index(e.id);
        switch (e.kind) {
            case EventKind::Scale: load_s_[i] = load_s0_[i] * (1.0 + e.value); break;
            case EventKind::Disconnect: load_s_[i] = {}; break;
            case EventKind::Set: {
                const double p = e.value / sb;
                const auto& s0 = load_s0_[i];
                load_s_[i] = s0.real() > 0 ? s0 * (p / s0.real()) : Complex{p, 0.0};
                break;
            }
            case EventKind::SetReactive: break;
        }
        return;
    }
    const auto j = *model_->generator_index(e.id);
    if (e.kind == EventKind::Set) dg_p_[j] = e.value / sb;
    else if (e.kind == EventKind::SetReactive) dg_q_offset_[j] = e.value / sb;
}

int Plant::run_to_steady_state(std::span<const double> pf_refs, int max_steps, double tol) {
    if (has_pending_events()) throw std::logic_error("run_to_steady_state requires an empty pending event list");
    std::vector<double> prev_all(solution_.v.size());
    for (std::size_t i = 0; i < prev_all.size(); ++i) prev_all[i] = std::abs(solution_.v[i]);
    for (int n = 1; n <= max_steps; ++n) {
        step(pf_refs, 0);
        double change = 0.0;
        for (std::size_t i = 0; i < prev_all.size(); ++i) {
            const double v = std::abs(solution_.v[i]);
            change = std::max(change, std::abs(v - prev_all[i]));
            prev_all[i] = v;
        }
        if (change < tol) return n - 1;
    }
    throw std::runtime_error("plant did not settle within " + std::to_string(max_steps) + " steps");
}

void Plant::perturb_generator(std::size_t dg, double dp, double dq) {
    dg_p_.at(dg) += dp;
    dg_q_offset_.at(dg) += dq;
}

std::string Plant::dump() const {
    std::ostringstream os;
    os.precision(17);
    os << "plant state at step " << k_ << " (t=" << time_s() << " s), op " << to_string(op_) << ", tap " << tap_
       << ", v_slack " << slack_voltage() << "\n";
    for (std::size_t j = 0; j < dg_p_.size(); ++j)
        os << "  " << model_->generators[j].id << ": p=" << dg_p_[j] << " q=" << dg_q_[j]
           << " q_offset=" << dg_q_offset_[j] << "\n";
    for (std::size_t i = 0; i < load_s_.size(); ++i)
        os << "  load " << model_->loads[i].id << ": " << load_s_[i].real() << " + j" << load_s_[i].imag() << "\n";
    return os.str();
}

}  // namespace vvc
