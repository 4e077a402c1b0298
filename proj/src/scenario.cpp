#include "vvc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vvc/number_format.hpp"

namespace vvc {

namespace {

using nlohmann::json;

constexpr double kSlackActive = 1e-6;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
}

PlantConfig parse_plant(const json& j) {
    reject_unknown(j, {"sample_time_s", "v_hv_pu", "avr_tau_s", "avr_tau_per_dg", "reactive_sign", "initial_tap",
                       "tap_min", "tap_max", "tap_step", "pf_min", "reactive_capability_limit", "controlled_buses"},
                   "plant");
    PlantConfig c;
    c.sample_time_s = j.value("sample_time_s", c.sample_time_s);
    c.v_hv_pu = j.value("v_hv_pu", c.v_hv_pu);
    c.avr_tau_s = j.value("avr_tau_s", c.avr_tau_s);
    if (j.contains("avr_tau_per_dg")) c.avr_tau_per_dg = j["avr_tau_per_dg"].get<std::vector<double>>();
    const auto sign = j.value("reactive_sign", std::string("absorb"));
    if (sign == "absorb") c.reactive_sign = ReactiveSign::Absorb;
    else if (sign == "inject") c.reactive_sign = ReactiveSign::Inject;
    else throw std::invalid_argument("reactive_sign must be 'absorb' or 'inject'");
    c.initial_tap = j.value("initial_tap", c.initial_tap);
    c.tap_min = j.value("tap_min", c.tap_min);
    c.tap_max = j.value("tap_max", c.tap_max);
    c.tap_step = j.value("tap_step", c.tap_step);
    c.pf_min = j.value("pf_min", c.pf_min);
    c.reactive_capability_limit = j.value("reactive_capability_limit", c.reactive_capability_limit);
    if (j.contains("controlled_buses")) c.controlled_buses = j["controlled_buses"].get<std::vector<std::string>>();
    return c;
}

ModelSpec parse_model_spec(const json& j, const std::filesystem::path& base) {
    reject_unknown(j, {"source", "cache", "operating_point", "M", "measured_generators", "input_amplitude",
                       "disturbance_amplitude"},
                   "model");
    ModelSpec m;
    const auto source = j.value("source", std::string("identify"));
    if (source == "identify") m.source = ModelSource::Identify;
    else if (source == "cache") m.source = ModelSource::Cache;
    else throw std::invalid_argument("model source must be 'identify' or 'cache'");
    if (j.contains("cache")) m.cache = resolve(base, j["cache"].get<std::string>());
    if (m.source == ModelSource::Cache && !m.cache) throw std::invalid_argument("model source 'cache' needs a cache path");
    m.operating_point = parse_operating_point(j.value("operating_point", std::string("7am")));
    m.M = j.value("M", m.M);
    if (j.contains("measured_generators"))
        m.measured_generators = j["measured_generators"].get<std::vector<std::string>>();
    m.input_amplitude = j.value("input_amplitude", m.input_amplitude);
    m.disturbance_amplitude = j.value("disturbance_amplitude", m.disturbance_amplitude);
    return m;
}

EventSchedule parse_events(const json& j) {
    std::vector<Event> events;
    for (const auto& e : j) {
        reject_unknown(e, {"time_s", "target", "id", "kind", "value"}, "event");
        Event ev;
        ev.time_s = e.at("time_s").get<double>();
        const auto target = e.at("target").get<std::string>();
        if (target == "load") ev.target = EventTarget::Load;
        else if (target == "generator") ev.target = EventTarget::Generator;
        else throw std::invalid_argument("event target must be 'load' or 'generator'");
        ev.id = e.at("id").get<std::string>();
        ev.kind = parse_event_kind(e.at("kind").get<std::string>());
        ev.value = e.value("value", 0.0);
        events.push_back(ev);
    }
    return EventSchedule(std::move(events));
}

}  // namespace

int ScenarioSpec::steps() const { return static_cast<int>(std::llround(duration_s / plant.sample_time_s)); }

void ScenarioSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("scenario needs a name");
    if (!(duration_s > 0.0)) throw std::invalid_argument("scenario duration must be positive");
    const double margin = 20.0 * plant.sample_time_s;
    if (!events.empty() && duration_s < events.last_time() + margin)
        throw std::invalid_argument("scenario duration must cover the last event plus " + format_double(margin) +
                                    " s of settling");
    if (model.M < 1) throw std::invalid_argument("model truncation length must be at least 1");
    if (std::abs(oltc.sample_time_s - plant.sample_time_s) > 1e-12)
        throw std::invalid_argument("supervisor and plant sample times differ");
    const auto ny = static_cast<Eigen::Index>(plant.controlled_buses.size());
    MpcConfig c = controller;
    c.resolve(ny);
}

ScenarioSpec parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
    const auto j = json::parse(text);
    reject_unknown(j, {"name", "network", "operating_point", "duration_s", "plant", "model", "controller", "oltc",
                       "events", "outputs"},
                   "scenario");
    ScenarioSpec s;
    s.name = j.at("name").get<std::string>();
    s.network = resolve(base_dir, j.at("network").get<std::string>());
    s.operating_point = parse_operating_point(j.at("operating_point").get<std::string>());
    s.duration_s = j.value("duration_s", s.duration_s);
    if (j.contains("plant")) s.plant = parse_plant(j["plant"]);
    if (j.contains("model")) s.model = parse_model_spec(j["model"], base_dir);
    if (j.contains("controller")) {
        const auto& c = j["controller"];
        s.controller = c.is_string() ? load_mpc_config(resolve(base_dir, c.get<std::string>()))
                                     : mpc_config_from_json(c.dump());
    }
    if (s.controller.q_weights.size() <= 1) {
        const double q = s.controller.q_weights.size() == 1 ? s.controller.q_weights[0] : 10.0;
        s.controller.q_weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.plant.controlled_buses.size()), q);
    }
    if (s.controller.y_ref.size() <= 1) {
        const double r = s.controller.y_ref.size() == 1 ? s.controller.y_ref[0] : 1.0;
        s.controller.y_ref = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.plant.controlled_buses.size()), r);
    }
    s.oltc.sample_time_s = s.plant.sample_time_s;
    if (j.contains("oltc")) {
        const auto& o = j["oltc"];
        reject_unknown(o, {"enabled", "dwell_time_s", "deadband"}, "oltc");
        s.oltc_enabled = o.value("enabled", false);
        s.oltc.dwell_time_s = o.value("dwell_time_s", s.oltc.dwell_time_s);
        s.oltc.deadband = o.value("deadband", s.oltc.deadband);
    }
    if (j.contains("events")) s.events = parse_events(j["events"]);
    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        reject_unknown(o, {"csv", "plot", "summary"}, "outputs");
        if (o.contains("csv")) s.csv_out = resolve(base_dir, o["csv"].get<std::string>());
        if (o.contains("plot")) s.plot_out = resolve(base_dir, o["plot"].get<std::string>());
        if (o.contains("summary")) s.summary_out = resolve(base_dir, o["summary"].get<std::string>());
    }
    s.validate();
    return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    const auto text = read_file(path);
    try {
        return parse_scenario(text, path.parent_path());
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::shared_ptr<const NetworkModel> load_network_shared(const std::filesystem::path& path) {
    return std::make_shared<const NetworkModel>(load_network(path));
}

NetworkPulsePlant identification_plant(std::shared_ptr<const NetworkModel> network, const ModelSpec& model,
                                       const PlantConfig& plant) {
    Plant p(std::move(network), model.operating_point, plant);
    const std::vector<double> unity(p.generator_count(), 1.0);
    p.run_to_steady_state(unity, 10 * model.M);
    return NetworkPulsePlant(std::move(p), model.measured_generators,
                             Eigen::VectorXd::Ones(static_cast<Eigen::Index>(unity.size())));
}

namespace {

ImpulseResponseModel identify_network(const NetworkPulsePlant& settled, const ModelSpec& spec,
                                      const PlantConfig& plant) {
    IdentifyOptions opts;
    opts.M = spec.M;
    opts.T = plant.sample_time_s;
    opts.operating_point = std::string(to_string(spec.operating_point));
    opts.input_amplitudes = Eigen::VectorXd::Constant(settled.inputs(), spec.input_amplitude);
    opts.disturbance_amplitudes = Eigen::VectorXd::Constant(settled.disturbances(), spec.disturbance_amplitude);
    return identify(settled, opts);
}

bool same_baseline(const ImpulseResponseModel& m, const NetworkPulsePlant& plant, const ModelSpec& spec) {
    return m.M == spec.M && m.operating_point == to_string(spec.operating_point) &&
           m.y0.size() == plant.outputs() && m.u0.size() == plant.inputs() && m.d0.size() == plant.disturbances() &&
           m.y0 == plant.output() && m.u0 == plant.nominal_input() && m.d0 == plant.nominal_disturbance() &&
           m.channels.disturbances == plant.registry().disturbances;
}

}  // namespace

ImpulseResponseModel obtain_model(const ScenarioSpec& spec, std::shared_ptr<const NetworkModel> network) {
    if (spec.model.source == ModelSource::Cache) return load_model(*spec.model.cache);
    const auto settled = identification_plant(std::move(network), spec.model, spec.plant);
    if (spec.model.cache && std::filesystem::exists(*spec.model.cache)) {
        auto cached = load_model(*spec.model.cache);
        if (same_baseline(cached, settled, spec.model)) return cached;
    }
    auto model = identify_network(settled, spec.model, spec.plant);
    if (spec.model.cache) {
        if (spec.model.cache->has_parent_path()) std::filesystem::create_directories(spec.model.cache->parent_path());
        save_model(model, *spec.model.cache);
    }
    return model;
}

Summary summarize(const std::string& name, const Trace& trace, double v_min, double v_max, double sample_time_s) {
    Summary s;
    s.name = name;
    s.records = static_cast<int>(trace.records.size());
    s.nodes = trace.voltage_names;
    const auto n = trace.voltage_names.size();
    s.time_outside_s.assign(n, 0.0);
    s.time_above_s.assign(n, 0.0);
    s.node_v_max.assign(n, -std::numeric_limits<double>::infinity());
    s.node_v_min.assign(n, std::numeric_limits<double>::infinity());
    s.v_max = -std::numeric_limits<double>::infinity();
    s.v_min = std::numeric_limits<double>::infinity();
    int prev_tap = trace.records.empty() ? 0 : trace.records.front().tap;
    for (const auto& r : trace.records) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = r.voltages[i];
            if (v > v_max) s.time_above_s[i] += sample_time_s;
            if (v > v_max || v < v_min) {
                s.time_outside_s[i] += sample_time_s;
                any = true;
            }
            s.node_v_max[i] = std::max(s.node_v_max[i], v);
            s.node_v_min[i] = std::min(s.node_v_min[i], v);
        }
        if (any) s.total_violation_time_s += sample_time_s;
        if (r.tap != prev_tap) {
            ++s.tap_changes;
            if (s.first_tap_change_s < 0.0) s.first_tap_change_s = r.time_s;
        }
        prev_tap = r.tap;
        s.max_eps1 = std::max(s.max_eps1, r.eps1);
        s.max_eps2 = std::max(s.max_eps2, r.eps2);
        if (r.eps1 > kSlackActive || r.eps2 > kSlackActive) ++s.slack_active_samples;
        for (const double pf : r.pf) {
            s.pf_min_applied = std::min(s.pf_min_applied, pf);
            s.pf_max_applied = std::max(s.pf_max_applied, pf);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        s.v_max = std::max(s.v_max, s.node_v_max[i]);
        s.v_min = std::min(s.v_min, s.node_v_min[i]);
        s.worst_time_above_s = std::max(s.worst_time_above_s, s.time_above_s[i]);
    }
    return s;
}

RunResult run_scenario(const ScenarioSpec& spec, const ImpulseResponseModel& model,
                       std::shared_ptr<const NetworkModel> network) {
    spec.validate();
    if (model.channels.outputs != spec.plant.controlled_buses)
        throw std::invalid_argument("model outputs do not match the plant's controlled buses");
    Plant plant(network, spec.operating_point, spec.plant, spec.events);
    if (static_cast<Eigen::Index>(plant.generator_count()) != model.nu())
        throw std::invalid_argument("model inputs do not match the plant's generators");
    const auto measured = generator_indices(*network, spec.model.measured_generators);
    if (static_cast<Eigen::Index>(2 * measured.size()) != model.nd())
        throw std::invalid_argument("model disturbances do not match the measured generators");

    MpcController controller(model, spec.controller);
    OltcSupervisor supervisor(spec.oltc);

    RunResult result;
    result.trace.voltage_names = spec.plant.controlled_buses;
    for (const auto& g : network->generators) result.trace.pf_names.push_back(g.id);

    std::string abort_reason;
    int degraded = 0;
    const int steps = spec.steps();
    for (int k = 0; k <= steps; ++k) {
        const auto m = plant.measure();
        const Eigen::Map<const Eigen::VectorXd> y(m.v_controlled.data(), static_cast<Eigen::Index>(m.v_controlled.size()));
        const auto out = controller.control_step(y, measured_disturbance(m, measured));
        const int cmd = spec.oltc_enabled && !out.degraded ? supervisor.supervise(out.eps1, out.eps2) : 0;

        TraceRecord rec;
        rec.time_s = m.time_s;
        rec.voltages = m.v_controlled;
        rec.pf.assign(out.pf.data(), out.pf.data() + out.pf.size());
        rec.eps1 = out.eps1;
        rec.eps2 = out.eps2;
        rec.tap = m.tap;
        for (const auto idx : m.events_applied) {
            const auto& e = spec.events.events()[idx];
            if (!rec.events.empty()) rec.events += ';';
            rec.events += e.id + ":" + std::string(to_string(e.kind));
        }
        result.trace.records.push_back(std::move(rec));

        if (out.degraded) {
            ++degraded;
            abort_reason = "controller degraded at t=" + format_double(m.time_s) + " s: " + out.failure;
            break;
        }
        if (k == steps) break;
        try {
            plant.step(std::span<const double>(out.pf.data(), static_cast<std::size_t>(out.pf.size())), cmd);
        } catch (const PlantDiverged& e) {
            abort_reason = std::string(e.what()) + "\n" + e.dump();
            break;
        }
    }
    result.summary = summarize(spec.name, result.trace, spec.controller.y_min, spec.controller.y_max,
                               spec.plant.sample_time_s);
    result.summary.aborted = !abort_reason.empty();
    result.summary.abort_reason = abort_reason;
    result.summary.degraded_steps = degraded;
    return result;
}

RunResult run_scenario(const ScenarioSpec& spec) {
    const auto network = load_network_shared(spec.network);
    return run_scenario(spec, obtain_model(spec, network), network);
}

namespace {

std::string model_key(const ScenarioSpec& s) {
    std::ostringstream os;
    os << s.network.string() << '|' << (s.model.source == ModelSource::Cache ? "cache" : "identify") << '|'
       << (s.model.cache ? s.model.cache->string() : "") << '|' << to_string(s.model.operating_point) << '|'
       << s.model.M << '|' << format_double(s.model.input_amplitude) << '|'
       << format_double(s.model.disturbance_amplitude) << '|' << format_double(s.plant.v_hv_pu) << '|'
       << format_double(s.plant.avr_tau_s) << '|' << s.plant.reactive_capability_limit << '|'
       << static_cast<int>(s.plant.reactive_sign) << '|' << s.plant.initial_tap;
    for (const auto& g : s.model.measured_generators) os << '|' << g;
    return os.str();
}

struct Resolved {
    std::vector<std::shared_ptr<const NetworkModel>> networks;
    std::vector<std::shared_ptr<const ImpulseResponseModel>> models;
};

Resolved resolve_models(const std::vector<ScenarioSpec>& specs) {
    std::map<std::string, std::shared_ptr<const NetworkModel>> networks;
    std::map<std::string, std::shared_ptr<const ImpulseResponseModel>> models;
    Resolved r;
    for (const auto& s : specs) {
        auto& net = networks[s.network.string()];
        if (!net) net = load_network_shared(s.network);
        auto& model = models[model_key(s)];
        if (!model) model = std::make_shared<const ImpulseResponseModel>(obtain_model(s, net));
        r.networks.push_back(net);
        r.models.push_back(model);
    }
    return r;
}

}  // namespace

std::vector<RunResult> run_batch_serial(const std::vector<ScenarioSpec>& specs) {
    const auto r = resolve_models(specs);
    std::vector<RunResult> out;
    for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(run_scenario(specs[i], *r.models[i], r.networks[i]));
    return out;
}

std::vector<RunResult> run_batch(const std::vector<ScenarioSpec>& specs) {
    const auto r = resolve_models(specs);
    std::vector<RunResult> out(specs.size());
    const auto n = static_cast<std::ptrdiff_t>(specs.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = run_scenario(specs[i], *r.models[i], r.networks[i]);
        } catch (...) {
#pragma omp critical(vvc_batch_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

// ---------------------------------------------------------------------------
// Trace files

std::string trace_to_csv(const Trace& trace) {
    std::string out = "time_s";
    for (const auto& n : trace.voltage_names) out += ",v_" + n;
    for (const auto& n : trace.pf_names) out += ",pf_" + n;
    out += ",eps1,eps2,tap,events\n";
    for (const auto& r : trace.records) {
        if (r.voltages.size() != trace.voltage_names.size() || r.pf.size() != trace.pf_names.size())
            throw std::invalid_argument("trace record width does not match the header");
        if (r.events.find_first_of(",\n\"") != std::string::npos)
            throw std::invalid_argument("event marker contains a CSV delimiter");
        out += format_double(r.time_s);
        for (const double v : r.voltages) out += ',' + format_double(v);
        for (const double v : r.pf) out += ',' + format_double(v);
        out += ',' + format_double(r.eps1) + ',' + format_double(r.eps2) + ',' + std::to_string(r.tap) + ',' +
               r.events + '\n';
    }
    return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char c : line) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

Trace trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty trace file");
    const auto header = split(line, ',');
    if (header.size() < 5 || header.front() != "time_s" || header.back() != "events")
        throw std::invalid_argument("unrecognized trace header");
    Trace t;
    std::size_t col = 1;
    while (col < header.size() && header[col].rfind("v_", 0) == 0) t.voltage_names.push_back(header[col++].substr(2));
    while (col < header.size() && header[col].rfind("pf_", 0) == 0) t.pf_names.push_back(header[col++].substr(3));
    if (header.size() - col != 4 || header[col] != "eps1" || header[col + 1] != "eps2" || header[col + 2] != "tap")
        throw std::invalid_argument("unrecognized trace header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size())
            throw std::invalid_argument("trace line " + std::to_string(lineno) + ": wrong field count");
        try {
            TraceRecord r;
            std::size_t c = 0;
            r.time_s = parse_double(f[c++]);
            for (std::size_t i = 0; i < t.voltage_names.size(); ++i) r.voltages.push_back(parse_double(f[c++]));
            for (std::size_t i = 0; i < t.pf_names.size(); ++i) r.pf.push_back(parse_double(f[c++]));
            r.eps1 = parse_double(f[c++]);
            r.eps2 = parse_double(f[c++]);
            r.tap = std::stoi(f[c++]);
            r.events = f[c];
            t.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return t;
}

void write_trace_csv(const Trace& trace, const std::filesystem::path& path) { write_file(path, trace_to_csv(trace)); }

std::string plot_script(const Trace& trace, const std::filesystem::path& csv_path,
                        const std::vector<int>& feeder_of_node, const std::vector<double>& references,
                        double v_min, double v_max) {
    if (trace.records.empty()) throw std::invalid_argument("cannot plot an empty trace");
    if (feeder_of_node.size() != trace.voltage_names.size() || references.size() != trace.voltage_names.size())
        throw std::invalid_argument("one feeder and one reference per voltage channel required");
    std::ostringstream os;
    os << "#!/usr/bin/env python3\n"
          "\"\"\"Controlled voltages per feeder with references and bounds.\"\"\"\n"
          "import csv\nimport sys\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";
    os << "CSV = " << json(csv_path.string()).dump() << "\n";
    os << "V_MIN = " << format_double(v_min) << "\nV_MAX = " << format_double(v_max) << "\n";
    os << "PANELS = [\n";
    std::vector<int> feeders = feeder_of_node;
    std::sort(feeders.begin(), feeders.end());
    feeders.erase(std::unique(feeders.begin(), feeders.end()), feeders.end());
    for (const int f : feeders) {
        os << "    (" << f << ", [";
        bool first = true;
        for (std::size_t i = 0; i < feeder_of_node.size(); ++i) {
            if (feeder_of_node[i] != f) continue;
            os << (first ? "" : ", ") << "(" << json(trace.voltage_names[i]).dump() << ", "
               << format_double(references[i]) << ")";
            first = false;
        }
        os << "]),\n";
    }
    os << "]\n\n"
          "def main():\n"
          "    out = sys.argv[1] if len(sys.argv) > 1 else CSV.rsplit(\".\", 1)[0] + \".png\"\n"
          "    with open(CSV, newline=\"\") as fh:\n"
          "        rows = list(csv.DictReader(fh))\n"
          "    t = [float(r[\"time_s\"]) for r in rows]\n"
          "    fig, axes = plt.subplots(len(PANELS), 1, sharex=True, figsize=(9, 3.2 * len(PANELS)))\n"
          "    if len(PANELS) == 1:\n"
          "        axes = [axes]\n"
          "    for ax, (feeder, nodes) in zip(axes, PANELS):\n"
          "        for name, ref in nodes:\n"
          "            line, = ax.plot(t, [float(r[\"v_\" + name]) for r in rows], label=name)\n"
          "            ax.axhline(ref, color=line.get_color(), linestyle=\"--\", linewidth=0.8)\n"
          "        ax.axhline(V_MAX, color=\"black\", linestyle=\"-.\", linewidth=1.0)\n"
          "        ax.axhline(V_MIN, color=\"black\", linestyle=\"-.\", linewidth=1.0)\n"
          "        ax.set_ylabel(\"feeder %d voltage [p.u.]\" % feeder)\n"
          "        ax.legend(loc=\"best\", fontsize=\"small\", ncol=3)\n"
          "        ax.grid(True, alpha=0.3)\n"
          "    axes[-1].set_xlabel(\"time [s]\")\n"
          "    fig.tight_layout()\n"
          "    fig.savefig(out, dpi=120)\n\n\n"
          "if __name__ == \"__main__\":\n"
          "    main()\n";
    return os.str();
}

std::string summary_to_json(const Summary& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["records"] = s.records;
    j["aborted"] = s.aborted;
    j["abort_reason"] = s.abort_reason;
    j["v_max"] = s.v_max;
    j["v_min"] = s.v_min;
    j["total_violation_time_s"] = s.total_violation_time_s;
    j["worst_time_above_s"] = s.worst_time_above_s;
    j["tap_changes"] = s.tap_changes;
    j["first_tap_change_s"] = s.first_tap_change_s;
    j["max_eps1"] = s.max_eps1;
    j["max_eps2"] = s.max_eps2;
    j["slack_active_samples"] = s.slack_active_samples;
    j["pf_min_applied"] = s.pf_min_applied;
    j["pf_max_applied"] = s.pf_max_applied;
    j["degraded_steps"] = s.degraded_steps;
    auto& nodes = j["nodes"];
    nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        nlohmann::ordered_json n;
        n["id"] = s.nodes[i];
        n["time_outside_s"] = s.time_outside_s[i];
        n["time_above_s"] = s.time_above_s[i];
        n["v_max"] = s.node_v_max[i];
        n["v_min"] = s.node_v_min[i];
        nodes.push_back(n);
    }
    return j.dump(2);
}

Summary summary_from_json(const std::string& text) {
    const auto j = json::parse(text);
    Summary s;
    s.name = j.at("name").get<std::string>();
    s.records = j.at("records").get<int>();
    s.aborted = j.at("aborted").get<bool>();
    s.abort_reason = j.value("abort_reason", "");
    s.v_max = j.at("v_max").get<double>();
    s.v_min = j.at("v_min").get<double>();
    s.total_violation_time_s = j.at("total_violation_time_s").get<double>();
    s.worst_time_above_s = j.at("worst_time_above_s").get<double>();
    s.tap_changes = j.at("tap_changes").get<int>();
    s.first_tap_change_s = j.at("first_tap_change_s").get<double>();
    s.max_eps1 = j.at("max_eps1").get<double>();
    s.max_eps2 = j.at("max_eps2").get<double>();
    s.slack_active_samples = j.at("slack_active_samples").get<int>();
    s.pf_min_applied = j.at("pf_min_applied").get<double>();
    s.pf_max_applied = j.at("pf_max_applied").get<double>();
    s.degraded_steps = j.at("degraded_steps").get<int>();
    for (const auto& n : j.at("nodes")) {
        s.nodes.push_back(n.at("id").get<std::string>());
        s.time_outside_s.push_back(n.at("time_outside_s").get<double>());
        s.time_above_s.push_back(n.at("time_above_s").get<double>());
        s.node_v_max.push_back(n.at("v_max").get<double>());
        s.node_v_min.push_back(n.at("v_min").get<double>());
    }
    return s;
}

std::string report_table(const std::vector<Summary>& summaries) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %8s %8s %9s %9s %5s %10s %10s %s\n", "scenario", "v_min", "v_max",
                  "viol[s]", "above[s]", "taps", "max_eps1", "max_eps2", "status");
    os << line;
    for (const auto& s : summaries) {
        std::snprintf(line, sizeof line, "%-28s %8.4f %8.4f %9.1f %9.1f %5d %10.3g %10.3g %s\n", s.name.c_str(),
                      s.v_min, s.v_max, s.total_violation_time_s, s.worst_time_above_s, s.tap_changes, s.max_eps1,
                      s.max_eps2, s.aborted ? "ABORTED" : "ok");
        os << line;
    }
    return os.str();
}

void emit_outputs(const ScenarioSpec& spec, const RunResult& result, const NetworkModel& network) {
    if (spec.csv_out) write_trace_csv(result.trace, *spec.csv_out);
    if (spec.plot_out) {
        const auto csv = spec.csv_out ? std::filesystem::absolute(*spec.csv_out) : std::filesystem::path(spec.name + ".csv");
        std::vector<int> feeders;
        for (const auto& id : result.trace.voltage_names) feeders.push_back(network.buses[*network.bus_index(id)].feeder);
        const std::vector<double> refs(spec.controller.y_ref.data(), spec.controller.y_ref.data() + spec.controller.y_ref.size());
        write_file(*spec.plot_out, plot_script(result.trace, csv, feeders, refs, spec.controller.y_min, spec.controller.y_max));
    }
    if (spec.summary_out) write_file(*spec.summary_out, summary_to_json(result.summary) + "\n");
}

}  // namespace vvc
