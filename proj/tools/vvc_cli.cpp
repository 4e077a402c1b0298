// Command-line front end: identify, run, batch, report, fuzz.
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "vvc/oltc.hpp"
#include "vvc/scenario.hpp"

namespace fs = std::filesystem;
using namespace vvc;

namespace {

struct Overrides {
    std::optional<double> pf_tolerance;
    std::optional<int> pf_max_iterations;
    std::optional<fs::path> model;
};

void apply(ScenarioSpec& spec, const Overrides& o, const fs::path& out_dir) {
    if (o.pf_tolerance) spec.plant.power_flow.tolerance = *o.pf_tolerance;
    if (o.pf_max_iterations) spec.plant.power_flow.max_iterations = *o.pf_max_iterations;
    if (o.model) {
        spec.model.source = ModelSource::Cache;
        spec.model.cache = *o.model;
    }
    spec.csv_out = out_dir / (spec.name + ".csv");
    spec.plot_out = out_dir / (spec.name + "_plot.py");
    spec.summary_out = out_dir / (spec.name + "_summary.json");
}

std::vector<fs::path> json_files(const fs::path& dir, const std::string& suffix) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().string().size() >= suffix.size() &&
            e.path().string().ends_with(suffix))
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open '" + p.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int finish(const std::vector<ScenarioSpec>& specs, const std::vector<RunResult>& results) {
    std::vector<Summary> summaries;
    bool aborted = false;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto network = load_network(specs[i].network);
        emit_outputs(specs[i], results[i], network);
        summaries.push_back(results[i].summary);
        if (results[i].summary.aborted) {
            aborted = true;
            std::cerr << specs[i].name << ": " << results[i].summary.abort_reason << "\n";
        }
    }
    std::cout << report_table(summaries);
    return aborted ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model predictive volt/var control workbench"};
    app.require_subcommand(1);

    Overrides overrides;
    fs::path out_dir = "out";
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out-dir", out_dir, "Directory for traces, plot scripts and summaries");
        cmd->add_option("--pf-tolerance", overrides.pf_tolerance, "Power-flow convergence tolerance (p.u.)");
        cmd->add_option("--pf-max-iter", overrides.pf_max_iterations, "Power-flow iteration limit");
        cmd->add_option("--model", overrides.model, "Use this cached model instead of identifying");
    };

    fs::path spec_path;
    fs::path model_out;
    auto* identify_cmd = app.add_subcommand("identify", "Identify the impulse-response model for a scenario");
    identify_cmd->add_option("scenario", spec_path, "Scenario file")->required()->check(CLI::ExistingFile);
    identify_cmd->add_option("-o,--output", model_out, "Model file to write")->required();

    auto* run_cmd = app.add_subcommand("run", "Run one scenario");
    run_cmd->add_option("scenario", spec_path, "Scenario file")->required()->check(CLI::ExistingFile);
    add_common(run_cmd);

    fs::path spec_dir;
    bool serial = false;
    auto* batch_cmd = app.add_subcommand("batch", "Run every scenario in a directory");
    batch_cmd->add_option("directory", spec_dir, "Directory of scenario files")->required()->check(CLI::ExistingDirectory);
    batch_cmd->add_flag("--serial", serial, "Run scenarios one after another");
    add_common(batch_cmd);

    fs::path report_dir;
    auto* report_cmd = app.add_subcommand("report", "Tabulate run summaries");
    report_cmd->add_option("directory", report_dir, "Directory holding *_summary.json files")
        ->required()
        ->check(CLI::ExistingDirectory);

    std::uint64_t seed = 1;
    long sequences = 1000;
    int length = 200;
    double dwell = 75.0;
    auto* fuzz_cmd = app.add_subcommand("fuzz", "Fuzz the tap supervisor with random slack sequences");
    fuzz_cmd->add_option("--seed", seed, "Random seed");
    fuzz_cmd->add_option("--sequences", sequences, "Number of sequences");
    fuzz_cmd->add_option("--length", length, "Samples per sequence");
    fuzz_cmd->add_option("--dwell", dwell, "Dwell time (s)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*identify_cmd) {
            const auto spec = load_scenario(spec_path);
            const auto network = load_network_shared(spec.network);
            const auto settled = identification_plant(network, spec.model, spec.plant);
            IdentifyOptions opts;
            opts.M = spec.model.M;
            opts.T = spec.plant.sample_time_s;
            opts.operating_point = std::string(to_string(spec.model.operating_point));
            opts.input_amplitudes = Eigen::VectorXd::Constant(settled.inputs(), spec.model.input_amplitude);
            opts.disturbance_amplitudes = Eigen::VectorXd::Constant(settled.disturbances(), spec.model.disturbance_amplitude);
            const auto model = identify(settled, opts);
            save_model(model, model_out);
            std::cout << "model " << model_out.string() << ": M=" << model.M << " ny=" << model.ny()
                      << " nu=" << model.nu() << " nd=" << model.nd()
                      << " exhaustion=" << model.exhaustion_ratio() << "\n";
            return 0;
        }
        if (*run_cmd) {
            auto spec = load_scenario(spec_path);
            apply(spec, overrides, out_dir);
            const auto t0 = std::chrono::steady_clock::now();
            auto result = run_scenario(spec);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cerr << spec.name << ": " << result.trace.records.size() << " samples in " << secs << " s\n";
            return finish({spec}, {result});
        }
        if (*batch_cmd) {
            std::vector<ScenarioSpec> specs;
            for (const auto& p : json_files(spec_dir, ".json")) {
                specs.push_back(load_scenario(p));
                apply(specs.back(), overrides, out_dir);
            }
            if (specs.empty()) throw std::runtime_error("no scenario files in '" + spec_dir.string() + "'");
            const auto results = serial ? run_batch_serial(specs) : run_batch(specs);
            return finish(specs, results);
        }
        if (*report_cmd) {
            std::vector<Summary> summaries;
            for (const auto& p : json_files(report_dir, "_summary.json")) summaries.push_back(summary_from_json(read_text(p)));
            if (summaries.empty()) throw std::runtime_error("no summaries in '" + report_dir.string() + "'");
            std::cout << report_table(summaries);
            return std::any_of(summaries.begin(), summaries.end(), [](const Summary& s) { return s.aborted; }) ? 2 : 0;
        }
        if (*fuzz_cmd) {
            std::mt19937_64 rng(seed);
            std::uniform_int_distribution<int> pick(0, 3);
            std::uniform_real_distribution<double> mag(0.0, 0.05);
            OltcOptions opts;
            opts.dwell_time_s = dwell;
            long violations = 0, commands = 0;
            // Slack pairs are held for random runs up to twice the dwell, so violations can persist.
            std::uniform_int_distribution<int> run_len(1, 2 * opts.dwell_samples());
            for (long s = 0; s < sequences; ++s) {
                OltcSupervisor sup(opts);
                int last = -1'000'000;
                int remaining = 0;
                double e1 = 0.0, e2 = 0.0;
                for (int k = 0; k < length; ++k) {
                    if (remaining-- <= 0) {
                        const int c = pick(rng);
                        e1 = c == 1 || c == 3 ? mag(rng) : 0.0;
                        e2 = c == 2 || c == 3 ? mag(rng) : 0.0;
                        remaining = run_len(rng) - 1;
                    }
                    if (sup.supervise(e1, e2) != 0) {
                        ++commands;
                        if (k - last < sup.dwell_samples()) ++violations;
                        last = k;
                    }
                }
            }
            std::cout << "sequences=" << sequences << " commands=" << commands << " spacing_violations=" << violations
                      << "\n";
            return violations == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
