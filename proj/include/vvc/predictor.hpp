#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vvc/sysid.hpp"

namespace vvc {

/// Last M inputs and disturbances in deviation coordinates, newest first.
class History {
public:
    History() = default;
    History(int M, Eigen::Index nu, Eigen::Index nd);

    int length() const { return M_; }
    Eigen::Index nu() const { return nu_; }
    Eigen::Index nd() const { return nd_; }

    void advance(const Eigen::VectorXd& u_applied, const Eigen::VectorXd& d_measured);
    /// u(k-i) for i = 1..M.
    Eigen::Ref<const Eigen::VectorXd> u(int i) const;
    /// d(k-i) for i = 1..M.
    Eigen::Ref<const Eigen::VectorXd> d(int i) const;
    void reset();

private:
    int slot(int i) const;

    int M_ = 0;
    Eigen::Index nu_ = 0, nd_ = 0;
    int head_ = 0;       // column holding u(k-1)
    Eigen::MatrixXd u_;  // nu x M ring
    Eigen::MatrixXd d_;  // nd x M ring
};

struct Prediction {
    int N = 0;
    int Nu = 0;
    Eigen::MatrixXd G;       // (N ny) x (Nu nu)
    Eigen::VectorXd F;       // free response, N ny
    Eigen::VectorXd delta;   // estimated unknown disturbance, ny

    Eigen::VectorXd outputs(const Eigen::VectorXd& U) const { return G * U + F; }
};

/// delta(k) = y(k) - sum_i [g_i u(k-i) + gamma_i d(k-i)].
Eigen::VectorXd estimate_delta(const ImpulseResponseModel& model, const History& history,
                               const Eigen::VectorXd& y_meas);

/// Block lower-triangular map from the Nu stacked moves to the N predicted outputs, with
/// the last move held for the rest of the horizon.
Eigen::MatrixXd dynamic_matrix(const ImpulseResponseModel& model, int N, int Nu);

/// Output prediction with U = 0. d_future is nd x N: column m holds d(k+m).
Eigen::VectorXd free_response(const ImpulseResponseModel& model, const History& history,
                              const Eigen::VectorXd& delta, const Eigen::MatrixXd& d_future, int N);

Prediction predict(const ImpulseResponseModel& model, const History& history, const Eigen::VectorXd& delta,
                   const Eigen::MatrixXd& d_future, int N, int Nu);

}  // namespace vvc
