#include "vvc/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vvc {

void ChannelRegistry::validate() const {
    std::set<std::string> seen;
    for (const auto* list : {&outputs, &inputs, &disturbances})
        for (const auto& name : *list)
            if (!seen.insert(name).second) throw std::invalid_argument("duplicate channel name '" + name + "'");
}

double ImpulseResponseModel::exhaustion_ratio() const {
    double peak = 0.0;
    for (const auto& gi : g) peak = std::max(peak, gi.cwiseAbs().rowwise().sum().maxCoeff());
    if (peak == 0.0 || g.empty()) return 0.0;
    return g.back().cwiseAbs().rowwise().sum().maxCoeff() / peak;
}

void ImpulseResponseModel::validate() const {
    if (M < 1) throw std::invalid_argument("impulse model needs M >= 1");
    if (static_cast<int>(g.size()) != M || static_cast<int>(gamma.size()) != M)
        throw std::invalid_argument("impulse model must hold M coefficient matrices");
    for (int i = 0; i < M; ++i) {
        if (g[i].rows() != ny() || g[i].cols() != nu())
            throw std::invalid_argument("g_" + std::to_string(i + 1) + " has wrong dimensions");
        if (gamma[i].rows() != ny() || gamma[i].cols() != nd())
            throw std::invalid_argument("gamma_" + std::to_string(i + 1) + " has wrong dimensions");
    }
    if (!channels.outputs.empty() &&
        (static_cast<Eigen::Index>(channels.outputs.size()) != ny() ||
         static_cast<Eigen::Index>(channels.inputs.size()) != nu() ||
         static_cast<Eigen::Index>(channels.disturbances.size()) != nd()))
        throw std::invalid_argument("channel registry does not match coefficient dimensions");
    channels.validate();
}

// ---------------------------------------------------------------------------
// Cache file

namespace {

using nlohmann::ordered_json;

ordered_json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const ordered_json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

ordered_json mat_to_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd mat_from_json(const ordered_json& j, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(j.size()) != rows) throw std::invalid_argument("coefficient matrix has wrong row count");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = vec_from_json(j[static_cast<std::size_t>(r)]);
        if (row.size() != cols) throw std::invalid_argument("coefficient matrix has wrong column count");
        m.row(r) = row.transpose();
    }
    return m;
}

}  // namespace

std::string model_to_json(const ImpulseResponseModel& model) {
    model.validate();
    ordered_json j;
    j["format"] = "vvc-impulse-model";
    j["version"] = 1;
    j["M"] = model.M;
    j["T"] = model.T;
    j["operating_point"] = model.operating_point;
    j["outputs"] = model.channels.outputs;
    j["inputs"] = model.channels.inputs;
    j["disturbances"] = model.channels.disturbances;
    j["y0"] = vec_to_json(model.y0);
    j["u0"] = vec_to_json(model.u0);
    j["d0"] = vec_to_json(model.d0);
    j["g"] = ordered_json::array();
    j["gamma"] = ordered_json::array();
    for (int i = 0; i < model.M; ++i) {
        j["g"].push_back(mat_to_json(model.g[i]));
        j["gamma"].push_back(mat_to_json(model.gamma[i]));
    }
    return j.dump(1);
}

ImpulseResponseModel model_from_json(const std::string& text) {
    const auto j = ordered_json::parse(text);
    if (j.value("format", "") != "vvc-impulse-model") throw std::invalid_argument("not an impulse model file");
    ImpulseResponseModel m;
    m.M = j.at("M").get<int>();
    m.T = j.at("T").get<double>();
    m.operating_point = j.at("operating_point").get<std::string>();
    m.channels.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.channels.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.channels.disturbances = j.at("disturbances").get<std::vector<std::string>>();
    m.y0 = vec_from_json(j.at("y0"));
    m.u0 = vec_from_json(j.at("u0"));
    m.d0 = vec_from_json(j.at("d0"));
    const auto& g = j.at("g");
    const auto& gamma = j.at("gamma");
    if (static_cast<int>(g.size()) != m.M || static_cast<int>(gamma.size()) != m.M)
        throw std::invalid_argument("model file coefficient count does not match M");
    for (int i = 0; i < m.M; ++i) {
        m.g.push_back(mat_from_json(g[static_cast<std::size_t>(i)], m.ny(), m.nu()));
        m.gamma.push_back(mat_from_json(gamma[static_cast<std::size_t>(i)], m.ny(), m.nd()));
    }
    m.validate();
    return m;
}

void save_model(const ImpulseResponseModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file '" + path.string() + "'");
    out << model_to_json(model) << '\n';
}

ImpulseResponseModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return model_from_json(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Plants

ChannelRegistry PulsePlant::registry() const {
    ChannelRegistry r;
    for (Eigen::Index i = 0; i < outputs(); ++i) r.outputs.push_back("y" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < inputs(); ++i) r.inputs.push_back("u" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < disturbances(); ++i) r.disturbances.push_back("d" + std::to_string(i + 1));
    return r;
}

StateSpacePlant::StateSpacePlant(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd E)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), E_(std::move(E)), x_(Eigen::VectorXd::Zero(A_.rows())) {
    if (E_.size() == 0) E_.resize(A_.rows(), 0);
    if (A_.rows() != A_.cols() || B_.rows() != A_.rows() || C_.cols() != A_.rows() || E_.rows() != A_.rows())
        throw std::invalid_argument("inconsistent state-space dimensions");
}

Eigen::VectorXd StateSpacePlant::step(const Eigen::VectorXd& u, const Eigen::VectorXd& d_offset) {
    x_ = A_ * x_ + B_ * u + E_ * d_offset;
    return output();
}

std::vector<std::size_t> generator_indices(const NetworkModel& model, const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    for (const auto& id : ids) {
        const auto idx = model.generator_index(id);
        if (!idx) throw std::invalid_argument("unknown generator '" + id + "'");
        out.push_back(*idx);
    }
    return out;
}

Eigen::VectorXd measured_disturbance(const Measurements& m, const std::vector<std::size_t>& measured) {
    const auto n = static_cast<Eigen::Index>(measured.size());
    Eigen::VectorXd d(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d[i] = m.dg_p[measured[static_cast<std::size_t>(i)]];
        d[n + i] = m.dg_q_offset[measured[static_cast<std::size_t>(i)]];
    }
    return d;
}

NetworkPulsePlant::NetworkPulsePlant(Plant plant, std::vector<std::string> measured_generators,
                                     Eigen::VectorXd nominal_pf)
    : plant_(std::move(plant)),
      measured_(generator_indices(plant_.model(), measured_generators)),
      nominal_pf_(std::move(nominal_pf)),
      applied_offset_(Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(measured_.size()))) {
    if (nominal_pf_.size() != static_cast<Eigen::Index>(plant_.generator_count()))
        throw std::invalid_argument("nominal power factor vector must cover every generator");
}

Eigen::Index NetworkPulsePlant::outputs() const {
    return static_cast<Eigen::Index>(plant_.config().controlled_buses.size());
}
Eigen::Index NetworkPulsePlant::inputs() const { return static_cast<Eigen::Index>(plant_.generator_count()); }
Eigen::Index NetworkPulsePlant::disturbances() const { return 2 * static_cast<Eigen::Index>(measured_.size()); }

Eigen::VectorXd NetworkPulsePlant::nominal_disturbance() const {
    return measured_disturbance(plant_.measure(), measured_) - applied_offset_;
}

Eigen::VectorXd NetworkPulsePlant::output() const {
    const auto v = plant_.measure().v_controlled;
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd NetworkPulsePlant::step(const Eigen::VectorXd& u, const Eigen::VectorXd& d_offset) {
    const auto n = static_cast<Eigen::Index>(measured_.size());
    const Eigen::VectorXd delta = d_offset - applied_offset_;
    for (Eigen::Index i = 0; i < n; ++i)
        if (delta[i] != 0.0 || delta[n + i] != 0.0)
            plant_.perturb_generator(measured_[static_cast<std::size_t>(i)], delta[i], delta[n + i]);
    applied_offset_ = d_offset;
    plant_.step(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), 0);
    return output();
}

std::pair<double, double> NetworkPulsePlant::input_range(Eigen::Index) const { return {plant_.config().pf_min, 1.0}; }

ChannelRegistry NetworkPulsePlant::registry() const {
    ChannelRegistry r;
    r.outputs = plant_.config().controlled_buses;
    for (const auto& g : plant_.model().generators) r.inputs.push_back("pf_" + g.id);
    for (const auto idx : measured_) r.disturbances.push_back("P_" + plant_.model().generators[idx].id);
    for (const auto idx : measured_) r.disturbances.push_back("Q_" + plant_.model().generators[idx].id);
    return r;
}

// ---------------------------------------------------------------------------
// Identification

namespace {

struct Experiment {
    const PulsePlant& plant;
    const IdentifyOptions& opts;
    Eigen::VectorXd u0;
    std::vector<Eigen::VectorXd> baseline;  // unperturbed outputs y(1..M)
};

/// Signed pulse amplitude that keeps input j inside its admissible range.
double pulse_amplitude(const PulsePlant& plant, Eigen::Index j, double u0, double a) {
    const auto [lo, hi] = plant.input_range(j);
    if (u0 + a > hi || u0 + a < lo) return -a;
    return a;
}

/// Normalized output deviations for channel c (inputs first, then disturbances), as
/// columns of the returned M matrices.
std::vector<Eigen::VectorXd> run_channel(const Experiment& ex, Eigen::Index c) {
    const auto nu = ex.plant.inputs();
    const bool is_input = c < nu;
    double a = is_input ? ex.opts.input_amplitudes[c] : ex.opts.disturbance_amplitudes[c - nu];
    if (a == 0.0)
        throw std::invalid_argument("zero pulse amplitude on channel " + std::to_string(c));
    if (is_input) a = pulse_amplitude(ex.plant, c, ex.u0[c], a);

    auto sim = ex.plant.clone();
    const Eigen::VectorXd d_zero = Eigen::VectorXd::Zero(ex.plant.disturbances());
    std::vector<Eigen::VectorXd> column(static_cast<std::size_t>(ex.opts.M));
    for (int s = 0; s < ex.opts.M; ++s) {
        Eigen::VectorXd u = ex.u0;
        Eigen::VectorXd d = d_zero;
        if (s == 0) {
            if (is_input) u[c] += a;
            else d[c - nu] = a;
        }
        const Eigen::VectorXd y = sim->step(u, d);
        column[static_cast<std::size_t>(s)] = (y - ex.baseline[static_cast<std::size_t>(s)]) / a;
    }
    return column;
}

void prepare(const PulsePlant& plant, IdentifyOptions& opts) {
    if (opts.M < 1) throw std::invalid_argument("M must be at least 1");
    if (opts.input_amplitudes.size() == 0) opts.input_amplitudes = Eigen::VectorXd::Constant(plant.inputs(), 0.02);
    if (opts.disturbance_amplitudes.size() == 0)
        opts.disturbance_amplitudes = Eigen::VectorXd::Constant(plant.disturbances(), 0.05);
    if (opts.input_amplitudes.size() != plant.inputs() || opts.disturbance_amplitudes.size() != plant.disturbances())
        throw std::invalid_argument("one pulse amplitude per channel required");
    for (Eigen::Index i = 0; i < opts.input_amplitudes.size(); ++i)
        if (opts.input_amplitudes[i] == 0.0) throw std::invalid_argument("zero pulse amplitude on input " + std::to_string(i));
    for (Eigen::Index i = 0; i < opts.disturbance_amplitudes.size(); ++i)
        if (opts.disturbance_amplitudes[i] == 0.0)
            throw std::invalid_argument("zero pulse amplitude on disturbance " + std::to_string(i));
}

ImpulseResponseModel assemble_model(const PulsePlant& plant, const IdentifyOptions& opts,
                                    const std::vector<std::vector<Eigen::VectorXd>>& columns) {
    const auto ny = plant.outputs();
    const auto nu = plant.inputs();
    const auto nd = plant.disturbances();
    ImpulseResponseModel m;
    m.M = opts.M;
    m.T = opts.T;
    m.operating_point = opts.operating_point;
    m.channels = plant.registry();
    m.y0 = plant.output();
    m.u0 = plant.nominal_input();
    m.d0 = plant.nominal_disturbance();
    m.g.assign(static_cast<std::size_t>(opts.M), Eigen::MatrixXd::Zero(ny, nu));
    m.gamma.assign(static_cast<std::size_t>(opts.M), Eigen::MatrixXd::Zero(ny, nd));
    for (Eigen::Index c = 0; c < nu + nd; ++c)
        for (int i = 0; i < opts.M; ++i) {
            const auto& col = columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            if (c < nu) m.g[static_cast<std::size_t>(i)].col(c) = col;
            else m.gamma[static_cast<std::size_t>(i)].col(c - nu) = col;
        }
    m.validate();
    return m;
}

std::string channel_name(const PulsePlant& plant, Eigen::Index c) {
    const auto reg = plant.registry();
    const auto nu = plant.inputs();
    return c < nu ? reg.inputs[static_cast<std::size_t>(c)] : reg.disturbances[static_cast<std::size_t>(c - nu)];
}

Experiment make_experiment(const PulsePlant& plant, const IdentifyOptions& opts) {
    Experiment ex{plant, opts, plant.nominal_input(), {}};
    auto sim = plant.clone();
    const Eigen::VectorXd d_zero = Eigen::VectorXd::Zero(plant.disturbances());
    try {
        for (int s = 0; s < opts.M; ++s) ex.baseline.push_back(sim->step(ex.u0, d_zero));
    } catch (const std::exception& e) {
        throw IdentificationError(std::string("baseline run failed: ") + e.what());
    }
    return ex;
}

}  // namespace

ImpulseResponseModel identify_serial(const PulsePlant& settled, IdentifyOptions opts) {
    prepare(settled, opts);
    const auto ex = make_experiment(settled, opts);
    const auto nc = settled.inputs() + settled.disturbances();
    std::vector<std::vector<Eigen::VectorXd>> columns(static_cast<std::size_t>(nc));
    for (Eigen::Index c = 0; c < nc; ++c) {
        try {
            columns[static_cast<std::size_t>(c)] = run_channel(ex, c);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw IdentificationError("pulse on channel '" + channel_name(settled, c) + "' failed: " + e.what());
        }
    }
    return assemble_model(settled, opts, columns);
}

ImpulseResponseModel identify(const PulsePlant& settled, IdentifyOptions opts) {
    prepare(settled, opts);
    const auto ex = make_experiment(settled, opts);
    const auto nc = settled.inputs() + settled.disturbances();
    std::vector<std::vector<Eigen::VectorXd>> columns(static_cast<std::size_t>(nc));
    std::vector<std::string> errors(static_cast<std::size_t>(nc));
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index c = 0; c < nc; ++c) {
        try {
            columns[static_cast<std::size_t>(c)] = run_channel(ex, c);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(c)] = e.what();
        }
    }
    for (Eigen::Index c = 0; c < nc; ++c)
        if (!errors[static_cast<std::size_t>(c)].empty())
            throw IdentificationError("pulse on channel '" + channel_name(settled, c) +
                                      "' failed: " + errors[static_cast<std::size_t>(c)]);
    return assemble_model(settled, opts, columns);
}

double LinearityReport::max_deviation() const {
    return deviation.empty() ? 0.0 : *std::max_element(deviation.begin(), deviation.end());
}

LinearityReport validate_linearity(const ImpulseResponseModel& model, const PulsePlant& settled,
                                   const std::pair<Eigen::VectorXd, Eigen::VectorXd>& input_amplitudes,
                                   const std::pair<Eigen::VectorXd, Eigen::VectorXd>& disturbance_amplitudes) {
    IdentifyOptions o1{model.M, model.T, model.operating_point, input_amplitudes.first, disturbance_amplitudes.first};
    IdentifyOptions o2{model.M, model.T, model.operating_point, input_amplitudes.second, disturbance_amplitudes.second};
    const auto m1 = identify(settled, o1);
    const auto m2 = identify(settled, o2);

    LinearityReport report;
    const auto score = [&](auto coeffs1, auto coeffs2, Eigen::Index col) {
        double diff = 0.0, peak = 0.0;
        for (int i = 0; i < model.M; ++i) {
            diff = std::max(diff, ((*coeffs1)[i].col(col) - (*coeffs2)[i].col(col)).cwiseAbs().maxCoeff());
            peak = std::max(peak, (*coeffs1)[i].col(col).cwiseAbs().maxCoeff());
        }
        return peak == 0.0 ? diff : diff / peak;
    };
    for (Eigen::Index j = 0; j < m1.nu(); ++j) {
        report.channels.push_back(m1.channels.inputs[static_cast<std::size_t>(j)]);
        report.deviation.push_back(score(&m1.g, &m2.g, j));
    }
    for (Eigen::Index j = 0; j < m1.nd(); ++j) {
        report.channels.push_back(m1.channels.disturbances[static_cast<std::size_t>(j)]);
        report.deviation.push_back(score(&m1.gamma, &m2.gamma, j));
    }
    return report;
}

}  // namespace vvc
