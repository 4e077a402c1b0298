#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vvc/grid_model.hpp"
#include "vvc/mpc.hpp"
#include "vvc/oltc.hpp"
#include "vvc/plant_sim.hpp"
#include "vvc/sysid.hpp"

namespace vvc {

enum class ModelSource { Identify, Cache };

struct ModelSpec {
    ModelSource source = ModelSource::Identify;
    std::optional<std::filesystem::path> cache;  // read for Cache, written after Identify
    OperatingPoint operating_point = OperatingPoint::Am7;
    int M = 90;
    std::vector<std::string> measured_generators{"DG1", "DG2", "DG3"};
    double input_amplitude = 0.02;
    double disturbance_amplitude = 0.05;
};

struct ScenarioSpec {
    std::string name;
    std::filesystem::path network;
    OperatingPoint operating_point = OperatingPoint::Am7;
    double duration_s = 700.0;
    PlantConfig plant;  // the plant starts at unity power factor with zero reactive state
    ModelSpec model;
    MpcConfig controller;
    bool oltc_enabled = false;
    OltcOptions oltc;
    EventSchedule events;
    std::optional<std::filesystem::path> csv_out;
    std::optional<std::filesystem::path> plot_out;
    std::optional<std::filesystem::path> summary_out;

    int steps() const;
    /// Throws std::invalid_argument naming the violated condition.
    void validate() const;
};

/// Relative paths in the file are resolved against base_dir.
ScenarioSpec parse_scenario(const std::string& text, const std::filesystem::path& base_dir);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct TraceRecord {
    double time_s = 0.0;
    std::vector<double> voltages;  // controlled buses
    std::vector<double> pf;        // applied power factors
    double eps1 = 0.0;
    double eps2 = 0.0;
    int tap = 0;
    std::string events;  // ';'-separated "id:kind" for events applied at this sample
};

struct Trace {
    std::vector<std::string> voltage_names;
    std::vector<std::string> pf_names;
    std::vector<TraceRecord> records;
};

struct Summary {
    std::string name;
    int records = 0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<std::string> nodes;
    std::vector<double> time_outside_s;  // per node, outside [v_min, v_max]
    std::vector<double> time_above_s;    // per node, above v_max
    std::vector<double> node_v_max;
    std::vector<double> node_v_min;
    double v_max = 0.0;
    double v_min = 0.0;
    double total_violation_time_s = 0.0;  // time with any node outside the band
    double worst_time_above_s = 0.0;
    int tap_changes = 0;
    double first_tap_change_s = -1.0;
    double max_eps1 = 0.0;
    double max_eps2 = 0.0;
    int slack_active_samples = 0;
    double pf_min_applied = 1.0;
    double pf_max_applied = 0.0;
    int degraded_steps = 0;
};

struct RunResult {
    Trace trace;
    Summary summary;
};

std::shared_ptr<const NetworkModel> load_network_shared(const std::filesystem::path& path);

/// Settled network plant at the model's operating point, wrapped for pulse experiments.
NetworkPulsePlant identification_plant(std::shared_ptr<const NetworkModel> network, const ModelSpec& model,
                                       const PlantConfig& plant);

/// Cache hit when the file exists and matches the requested operating point and M;
/// otherwise identifies and writes the cache when a path is given.
ImpulseResponseModel obtain_model(const ScenarioSpec& spec, std::shared_ptr<const NetworkModel> network);

/// Closed loop: measure, control step, supervise, plant step. Never throws on plant or solver
/// failure; the summary is marked aborted and the trace holds every completed sample.
RunResult run_scenario(const ScenarioSpec& spec, const ImpulseResponseModel& model,
                       std::shared_ptr<const NetworkModel> network);
RunResult run_scenario(const ScenarioSpec& spec);

Summary summarize(const std::string& name, const Trace& trace, double v_min, double v_max, double sample_time_s);

/// Runs specs concurrently; models are resolved first, one per distinct cache key.
std::vector<RunResult> run_batch(const std::vector<ScenarioSpec>& specs);
std::vector<RunResult> run_batch_serial(const std::vector<ScenarioSpec>& specs);

std::string trace_to_csv(const Trace& trace);
Trace trace_from_csv(const std::string& text);
void write_trace_csv(const Trace& trace, const std::filesystem::path& path);

/// Python/matplotlib script drawing one voltage panel per feeder with references and bounds.
std::string plot_script(const Trace& trace, const std::filesystem::path& csv_path,
                        const std::vector<int>& feeder_of_node, const std::vector<double>& references,
                        double v_min, double v_max);

std::string summary_to_json(const Summary& s);
Summary summary_from_json(const std::string& text);
/// Fixed-width table across runs.
std::string report_table(const std::vector<Summary>& summaries);

/// Writes the outputs requested in the spec (CSV, plot script, summary).
void emit_outputs(const ScenarioSpec& spec, const RunResult& result, const NetworkModel& network);

}  // namespace vvc
