#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>

#include "vvc/predictor.hpp"
#include "vvc/qp.hpp"
#include "vvc/sysid.hpp"

namespace vvc {

/// Controller settings. Input and output limits are absolute (power factor, p.u. voltage)
/// and converted to deviation coordinates around the model baseline at assembly.
struct MpcConfig {
    int N = 10;
    int Nu = 2;
    Eigen::VectorXd q_weights;  // per output channel; empty means 10 on every channel
    double r_weight = 0.1;
    double mu1 = 1000.0;
    double mu2 = 1000.0;
    double u_min = 0.6;
    double u_max = 1.0;
    double y_min = 0.9;
    double y_max = 1.1;
    Eigen::VectorXd y_ref;  // absolute references; empty means 1.0 p.u. everywhere

    /// Fills defaulted vectors for ny outputs and checks the invariants.
    void resolve(Eigen::Index ny);
    void validate(Eigen::Index ny) const;
};

MpcConfig mpc_config_from_json(const std::string& text);
std::string mpc_config_to_json(const MpcConfig& cfg);
MpcConfig load_mpc_config(const std::filesystem::path& path);

/// Everything assemble needs besides the prediction, in deviation coordinates.
struct MpcTargets {
    Eigen::VectorXd y_ref;  // ny
    Eigen::VectorXd y_min;  // ny
    Eigen::VectorXd y_max;  // ny
    Eigen::VectorXd u_min;  // nu
    Eigen::VectorXd u_max;  // nu
};

MpcTargets deviation_targets(const MpcConfig& cfg, const ImpulseResponseModel& model);

/// Decision z = [U; eps1; eps2]. General rows: G U - eps2 <= Ymax - F (N ny rows), then
/// -G U - eps1 <= F - Ymin (N ny rows).
QpProblem assemble(const MpcConfig& cfg, const MpcTargets& targets, const Prediction& pred);

/// Explicit cost (Y - Yref)'Qbar(Y - Yref) + U'Rbar U + mu1 eps1^2 + mu2 eps2^2.
double mpc_objective(const MpcConfig& cfg, const MpcTargets& targets, const Prediction& pred,
                     const Eigen::VectorXd& z);

struct ControlOutput {
    Eigen::VectorXd pf;     // absolute power factors to apply
    Eigen::VectorXd u;      // deviation from the model baseline
    double eps1 = 0.0;
    double eps2 = 0.0;
    bool degraded = false;  // solver failed; previous input held
    std::string failure;
    int qp_iterations = 0;
};

/// Receding-horizon controller: one QP per sample, first move applied.
class MpcController {
public:
    MpcController(ImpulseResponseModel model, MpcConfig cfg);

    const ImpulseResponseModel& model() const { return model_; }
    const MpcConfig& config() const { return cfg_; }
    const History& history() const { return history_; }
    const MpcTargets& targets() const { return targets_; }

    /// y_meas and d_meas are absolute measurements at the current sample. d_future, if
    /// given, is nd x N in deviation coordinates; otherwise the current deviation is held.
    ControlOutput control_step(const Eigen::VectorXd& y_meas, const Eigen::VectorXd& d_meas,
                               const std::optional<Eigen::MatrixXd>& d_future = std::nullopt);

    /// Last QP solved, for diagnostics.
    const std::optional<QpProblem>& last_problem() const { return last_qp_; }

private:
    ImpulseResponseModel model_;
    MpcConfig cfg_;
    MpcTargets targets_;
    Eigen::MatrixXd G_;
    History history_;
    Eigen::VectorXd u_prev_;
    bool started_ = false;
    std::optional<QpProblem> last_qp_;
};

}  // namespace vvc
