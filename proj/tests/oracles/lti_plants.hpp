#pragma once
// Synthetic plants with closed-form impulse responses.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "vvc/sysid.hpp"

namespace oracle {

/// x+ = a x + u, y = x: g_i = a^(i-1).
inline vvc::StateSpacePlant first_order(double a) {
    return vvc::StateSpacePlant(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Ones(1, 1),
                                Eigen::MatrixXd::Ones(1, 1));
}
inline double first_order_g(double a, int i) { return std::pow(a, i - 1); }

/// y(k) = 2 r cos(t) y(k-1) - r^2 y(k-2) + u(k-1): g_i = r^(i-1) sin(i t) / sin(t).
inline vvc::StateSpacePlant second_order(double r, double theta) {
    Eigen::MatrixXd A(2, 2);
    A << 2.0 * r * std::cos(theta), -r * r, 1.0, 0.0;
    Eigen::MatrixXd B(2, 1);
    B << 1.0, 0.0;
    Eigen::MatrixXd C(1, 2);
    C << 1.0, 0.0;
    return vvc::StateSpacePlant(A, B, C);
}
inline double second_order_g(double r, double theta, int i) {
    return std::pow(r, i - 1) * std::sin(i * theta) / std::sin(theta);
}

/// y(k) = u(k - D): g_D = 1, all others zero.
inline vvc::StateSpacePlant pure_delay(int D) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(D, D);
    for (int i = 1; i < D; ++i) A(i, i - 1) = 1.0;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(D, 1);
    B(0, 0) = 1.0;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(1, D);
    C(0, D - 1) = 1.0;
    return vvc::StateSpacePlant(A, B, C);
}
inline double pure_delay_g(int D, int i) { return i == D ? 1.0 : 0.0; }

}  // namespace oracle
