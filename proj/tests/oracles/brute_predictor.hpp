#pragma once
// Output prediction by direct convolution over an explicit time line, with move blocking
// applied to the input sequence before convolving.

#include <Eigen/Dense>
#include <vector>

#include "vvc/sysid.hpp"

namespace oracle {

/// past_u[l-1] = u(k-l), past_d[l-1] = d(k-l) for l = 1..M. moves[m] = u(k+m) for m < Nu;
/// d_future[m] = d(k+m). Returns y(k+1..k+N) stacked.
inline Eigen::VectorXd brute_predict(const vvc::ImpulseResponseModel& model, const std::vector<Eigen::VectorXd>& past_u,
                                     const std::vector<Eigen::VectorXd>& past_d, const std::vector<Eigen::VectorXd>& moves,
                                     const std::vector<Eigen::VectorXd>& d_future, const Eigen::VectorXd& delta, int N) {
    const int M = model.M;
    const int Nu = static_cast<int>(moves.size());
    // Time line index t corresponds to k + t, t in [-M, N).
    const auto u_at = [&](int t) -> Eigen::VectorXd {
        if (t < 0) return past_u[static_cast<std::size_t>(-t - 1)];
        return moves[static_cast<std::size_t>(std::min(t, Nu - 1))];
    };
    const auto d_at = [&](int t) -> Eigen::VectorXd {
        if (t < 0) return past_d[static_cast<std::size_t>(-t - 1)];
        return d_future[static_cast<std::size_t>(t)];
    };
    Eigen::VectorXd Y(N * model.ny());
    for (int i = 1; i <= N; ++i) {
        Eigen::VectorXd y = delta;
        for (int j = 1; j <= M; ++j) {
            y += model.g[j - 1] * u_at(i - j);
            y += model.gamma[j - 1] * d_at(i - j);
        }
        Y.segment((i - 1) * model.ny(), model.ny()) = y;
    }
    return Y;
}

}  // namespace oracle
