#include "vvc/predictor.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace vvc {

namespace {

int checked_length(int M) {
    if (M < 1) throw std::invalid_argument("history length must be at least 1");
    return M;
}

}  // namespace

History::History(int M, Eigen::Index nu, Eigen::Index nd)
    : M_(checked_length(M)), nu_(nu), nd_(nd), u_(Eigen::MatrixXd::Zero(nu, M)), d_(Eigen::MatrixXd::Zero(nd, M)) {}

int History::slot(int i) const {
    if (i < 1 || i > M_) throw std::out_of_range("history index " + std::to_string(i) + " outside 1..M");
    return (head_ + i - 1) % M_;
}

Eigen::Ref<const Eigen::VectorXd> History::u(int i) const { return u_.col(slot(i)); }
Eigen::Ref<const Eigen::VectorXd> History::d(int i) const { return d_.col(slot(i)); }

void History::advance(const Eigen::VectorXd& u_applied, const Eigen::VectorXd& d_measured) {
    if (u_applied.size() != nu_ || d_measured.size() != nd_)
        throw std::invalid_argument("history advance: dimension mismatch");
    head_ = (head_ + M_ - 1) % M_;
    u_.col(head_) = u_applied;
    d_.col(head_) = d_measured;
}

void History::reset() {
    u_.setZero();
    d_.setZero();
    head_ = 0;
}

namespace {

void check_dims(const ImpulseResponseModel& model, const History& history) {
    if (history.length() != model.M || history.nu() != model.nu() || history.nd() != model.nd())
        throw std::invalid_argument("history does not match model dimensions");
}

}  // namespace

Eigen::VectorXd estimate_delta(const ImpulseResponseModel& model, const History& history,
                               const Eigen::VectorXd& y_meas) {
    check_dims(model, history);
    if (y_meas.size() != model.ny()) throw std::invalid_argument("measurement size does not match model outputs");
    Eigen::VectorXd delta = y_meas;
    for (int i = 1; i <= model.M; ++i)
        delta -= model.g[i - 1] * history.u(i) + model.gamma[i - 1] * history.d(i);
    return delta;
}

Eigen::MatrixXd dynamic_matrix(const ImpulseResponseModel& model, int N, int Nu) {
    if (N < 1 || Nu < 1 || Nu > N) throw std::invalid_argument("horizons must satisfy N >= Nu >= 1");
    const auto ny = model.ny(), nu = model.nu();
    const auto coeff = [&](int j) -> Eigen::MatrixXd {
        return j >= 1 && j <= model.M ? model.g[j - 1] : Eigen::MatrixXd::Zero(ny, nu);
    };
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N * ny, Nu * nu);
    for (int i = 1; i <= N; ++i) {
        for (int b = 0; b < Nu - 1 && b < i; ++b) G.block((i - 1) * ny, b * nu, ny, nu) = coeff(i - b);
        // Moves from Nu-1 on are the held last move: u(k+m), m >= Nu-1, enters through g_{i-m}.
        for (int j = 1; j <= i - Nu + 1; ++j) G.block((i - 1) * ny, (Nu - 1) * nu, ny, nu) += coeff(j);
    }
    return G;
}

Eigen::VectorXd free_response(const ImpulseResponseModel& model, const History& history,
                              const Eigen::VectorXd& delta, const Eigen::MatrixXd& d_future, int N) {
    check_dims(model, history);
    if (delta.size() != model.ny()) throw std::invalid_argument("delta size does not match model outputs");
    if (d_future.rows() != model.nd() || d_future.cols() != N)
        throw std::invalid_argument("d_future must be nd x N");
    const auto ny = model.ny();
    Eigen::VectorXd F(N * ny);
    for (int i = 1; i <= N; ++i) {
        Eigen::VectorXd y = delta;
        for (int j = 1; j <= std::min(i, model.M); ++j) y += model.gamma[j - 1] * d_future.col(i - j);
        for (int j = i + 1; j <= model.M; ++j)
            y += model.g[j - 1] * history.u(j - i) + model.gamma[j - 1] * history.d(j - i);
        F.segment((i - 1) * ny, ny) = y;
    }
    return F;
}

Prediction predict(const ImpulseResponseModel& model, const History& history, const Eigen::VectorXd& delta,
                   const Eigen::MatrixXd& d_future, int N, int Nu) {
    Prediction p;
    p.N = N;
    p.Nu = Nu;
    p.G = dynamic_matrix(model, N, Nu);
    p.F = free_response(model, history, delta, d_future, N);
    p.delta = delta;
    return p;
}

}  // namespace vvc
