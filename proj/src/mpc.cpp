#include "vvc/mpc.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vvc {

void MpcConfig::resolve(Eigen::Index ny) {
    if (q_weights.size() == 0) q_weights = Eigen::VectorXd::Constant(ny, 10.0);
    if (y_ref.size() == 0) y_ref = Eigen::VectorXd::Constant(ny, 1.0);
    if (q_weights.size() == 1 && ny > 1) q_weights = Eigen::VectorXd::Constant(ny, q_weights[0]);
    if (y_ref.size() == 1 && ny > 1) y_ref = Eigen::VectorXd::Constant(ny, y_ref[0]);
    validate(ny);
}

void MpcConfig::validate(Eigen::Index ny) const {
    if (!(N >= Nu && Nu >= 1)) throw std::invalid_argument("controller horizons must satisfy N >= Nu >= 1");
    if (q_weights.size() != ny) throw std::invalid_argument("one output weight per controlled channel required");
    if (y_ref.size() != ny) throw std::invalid_argument("one voltage reference per controlled channel required");
    if (!(q_weights.array() > 0.0).all()) throw std::invalid_argument("output weights must be positive");
    if (!(r_weight > 0.0)) throw std::invalid_argument("input weight must be positive");
    if (!(mu1 > 0.0 && mu2 > 0.0)) throw std::invalid_argument("slack weights must be positive");
    if (!(u_min < u_max)) throw std::invalid_argument("power factor bounds must satisfy u_min < u_max");
    if (!(y_min < y_max)) throw std::invalid_argument("voltage bounds must satisfy y_min < y_max");
}

namespace {

using nlohmann::json;

Eigen::VectorXd scalar_or_vector(const json& j) {
    if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

MpcConfig mpc_config_from_json(const std::string& text) {
    const auto j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("controller configuration must be a JSON object");
    static const std::vector<std::string> known{"N", "Nu", "Q", "R", "mu1", "mu2", "pf_min", "pf_max",
                                                "v_min", "v_max", "v_ref"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown controller setting '" + key + "'");
    MpcConfig c;
    c.N = j.value("N", c.N);
    c.Nu = j.value("Nu", c.Nu);
    c.r_weight = j.value("R", c.r_weight);
    c.mu1 = j.value("mu1", c.mu1);
    c.mu2 = j.value("mu2", c.mu2);
    c.u_min = j.value("pf_min", c.u_min);
    c.u_max = j.value("pf_max", c.u_max);
    c.y_min = j.value("v_min", c.y_min);
    c.y_max = j.value("v_max", c.y_max);
    // A scalar weight or reference is expanded to all channels when the model is known.
    if (j.contains("Q")) c.q_weights = scalar_or_vector(j["Q"]);
    if (j.contains("v_ref")) c.y_ref = scalar_or_vector(j["v_ref"]);
    return c;
}

std::string mpc_config_to_json(const MpcConfig& cfg) {
    nlohmann::ordered_json j;
    j["N"] = cfg.N;
    j["Nu"] = cfg.Nu;
    j["Q"] = std::vector<double>(cfg.q_weights.data(), cfg.q_weights.data() + cfg.q_weights.size());
    j["R"] = cfg.r_weight;
    j["mu1"] = cfg.mu1;
    j["mu2"] = cfg.mu2;
    j["pf_min"] = cfg.u_min;
    j["pf_max"] = cfg.u_max;
    j["v_min"] = cfg.y_min;
    j["v_max"] = cfg.y_max;
    j["v_ref"] = std::vector<double>(cfg.y_ref.data(), cfg.y_ref.data() + cfg.y_ref.size());
    return j.dump(2);
}

MpcConfig load_mpc_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open controller configuration '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return mpc_config_from_json(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

namespace {

Eigen::VectorXd expand(const Eigen::VectorXd& v, Eigen::Index n) {
    return v.size() == 1 && n != 1 ? Eigen::VectorXd::Constant(n, v[0]) : v;
}

}  // namespace

MpcTargets deviation_targets(const MpcConfig& cfg, const ImpulseResponseModel& model) {
    const auto ny = model.ny();
    MpcTargets t;
    t.y_ref = expand(cfg.y_ref, ny) - model.y0;
    t.y_min = Eigen::VectorXd::Constant(ny, cfg.y_min) - model.y0;
    t.y_max = Eigen::VectorXd::Constant(ny, cfg.y_max) - model.y0;
    t.u_min = Eigen::VectorXd::Constant(model.nu(), cfg.u_min) - model.u0;
    t.u_max = Eigen::VectorXd::Constant(model.nu(), cfg.u_max) - model.u0;
    if (!(t.u_min.array() <= 0.0).all() || !(t.u_max.array() >= 0.0).all())
        throw std::invalid_argument("model operating power factors lie outside the controller's input bounds");
    return t;
}

namespace {

Eigen::VectorXd stacked(const Eigen::VectorXd& v, int times) { return v.replicate(times, 1); }

}  // namespace

QpProblem assemble(const MpcConfig& cfg, const MpcTargets& targets, const Prediction& pred) {
    const auto ny = targets.y_ref.size();
    const auto nu = targets.u_min.size();
    const auto rows = static_cast<Eigen::Index>(pred.N) * ny;
    const auto nU = static_cast<Eigen::Index>(pred.Nu) * nu;
    if (pred.G.rows() != rows || pred.G.cols() != nU || pred.F.size() != rows)
        throw std::invalid_argument("prediction does not match the controller dimensions");
    const Eigen::VectorXd q = stacked(expand(cfg.q_weights, ny), pred.N);
    if (q.size() != rows) throw std::invalid_argument("output weights do not match the model");

    const Eigen::VectorXd e = pred.F - stacked(targets.y_ref, pred.N);
    const Eigen::MatrixXd QG = q.asDiagonal() * pred.G;

    QpProblem qp;
    const auto n = nU + 2;
    qp.H = Eigen::MatrixXd::Zero(n, n);
    qp.H.topLeftCorner(nU, nU) = 2.0 * (pred.G.transpose() * QG);
    qp.H.topLeftCorner(nU, nU).diagonal().array() += 2.0 * cfg.r_weight;
    qp.H.topLeftCorner(nU, nU) = 0.5 * (qp.H.topLeftCorner(nU, nU) + qp.H.topLeftCorner(nU, nU).transpose()).eval();
    qp.H(nU, nU) = 2.0 * cfg.mu1;
    qp.H(nU + 1, nU + 1) = 2.0 * cfg.mu2;
    qp.f = Eigen::VectorXd::Zero(n);
    qp.f.head(nU) = 2.0 * QG.transpose() * e;
    qp.constant = e.dot(q.asDiagonal() * e);

    const Eigen::VectorXd ymax = stacked(targets.y_max, pred.N);
    const Eigen::VectorXd ymin = stacked(targets.y_min, pred.N);
    qp.A = Eigen::MatrixXd::Zero(2 * rows, n);
    qp.A.topLeftCorner(rows, nU) = pred.G;
    qp.A.block(0, nU + 1, rows, 1).setConstant(-1.0);
    qp.A.bottomLeftCorner(rows, nU) = -pred.G;
    qp.A.block(rows, nU, rows, 1).setConstant(-1.0);
    qp.b.resize(2 * rows);
    qp.b.head(rows) = ymax - pred.F;
    qp.b.tail(rows) = pred.F - ymin;

    const double inf = std::numeric_limits<double>::infinity();
    qp.lb.resize(n);
    qp.ub.resize(n);
    qp.lb.head(nU) = stacked(targets.u_min, pred.Nu);
    qp.ub.head(nU) = stacked(targets.u_max, pred.Nu);
    qp.lb.tail(2).setZero();
    qp.ub.tail(2).setConstant(inf);
    if (!(qp.lb.head(nU).array() <= qp.ub.head(nU).array()).all())
        throw std::invalid_argument("input bounds are inconsistent");

    const Eigen::LLT<Eigen::MatrixXd> chol(qp.H);
    if (chol.info() != Eigen::Success) throw std::logic_error("assembled Hessian is not positive definite");

    // Feasible start: zero moves clipped to the box, slacks covering the resulting violation with
    // some room. With zero history every horizon block predicts the same output, so a slack sitting
    // exactly on the worst violation would touch dozens of rows at once.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    z.head(nU) = Eigen::VectorXd::Zero(nU).cwiseMax(qp.lb.head(nU)).cwiseMin(qp.ub.head(nU));
    const Eigen::VectorXd y = pred.G * z.head(nU) + pred.F;
    const double low = (ymin - y).maxCoeff(), high = (y - ymax).maxCoeff();
    z[nU] = low > 0.0 ? low + 0.01 : 0.0;
    z[nU + 1] = high > 0.0 ? high + 0.01 : 0.0;
    qp.start = z;
    return qp;
}

double mpc_objective(const MpcConfig& cfg, const MpcTargets& targets, const Prediction& pred,
                     const Eigen::VectorXd& z) {
    const auto ny = targets.y_ref.size();
    const auto nU = pred.G.cols();
    const Eigen::VectorXd q = stacked(expand(cfg.q_weights, ny), pred.N);
    const Eigen::VectorXd e = pred.G * z.head(nU) + pred.F - stacked(targets.y_ref, pred.N);
    return e.dot(q.asDiagonal() * e) + cfg.r_weight * z.head(nU).squaredNorm() + cfg.mu1 * z[nU] * z[nU] +
           cfg.mu2 * z[nU + 1] * z[nU + 1];
}

MpcController::MpcController(ImpulseResponseModel model, MpcConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
    model_.validate();
    cfg_.q_weights = expand(cfg_.q_weights, model_.ny());
    cfg_.y_ref = expand(cfg_.y_ref, model_.ny());
    cfg_.resolve(model_.ny());
    targets_ = deviation_targets(cfg_, model_);
    G_ = dynamic_matrix(model_, cfg_.N, cfg_.Nu);
    history_ = History(model_.M, model_.nu(), model_.nd());
    u_prev_ = Eigen::VectorXd::Zero(model_.nu());
}

ControlOutput MpcController::control_step(const Eigen::VectorXd& y_meas, const Eigen::VectorXd& d_meas,
                                          const std::optional<Eigen::MatrixXd>& d_future) {
    if (y_meas.size() != model_.ny() || d_meas.size() != model_.nd())
        throw std::invalid_argument("measurement vectors do not match the model");
    const Eigen::VectorXd y = y_meas - model_.y0;
    const Eigen::VectorXd d = d_meas - model_.d0;
    // The disturbance measured now acted on the plant over the last sample.
    if (started_) history_.advance(u_prev_, d);
    started_ = true;

    Prediction pred;
    pred.N = cfg_.N;
    pred.Nu = cfg_.Nu;
    pred.G = G_;
    pred.delta = estimate_delta(model_, history_, y);
    const Eigen::MatrixXd dfut = d_future ? *d_future : Eigen::MatrixXd(d.replicate(1, cfg_.N));
    pred.F = free_response(model_, history_, pred.delta, dfut, cfg_.N);

    ControlOutput out;
    try {
        last_qp_ = assemble(cfg_, targets_, pred);
        const auto sol = solve_qp(*last_qp_);
        const auto nU = G_.cols();
        out.u = sol.z.head(model_.nu());
        // Slacks sit on their zero bound up to rounding; report them nonnegative.
        out.eps1 = std::max(0.0, sol.z[nU]);
        out.eps2 = std::max(0.0, sol.z[nU + 1]);
        out.qp_iterations = sol.iterations;
    } catch (const std::exception& e) {
        out.u = u_prev_;
        out.degraded = true;
        out.failure = e.what();
    }
    out.pf = (out.u + model_.u0).cwiseMax(cfg_.u_min).cwiseMin(cfg_.u_max);
    out.u = out.pf - model_.u0;
    u_prev_ = out.u;
    return out;
}

}  // namespace vvc
