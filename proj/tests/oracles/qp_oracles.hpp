#pragma once
// Reference minimizers for small QPs: projected gradient on a box, and exhaustive
// active-set enumeration for a few variables with general inequalities.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

/// min 0.5 z'Hz + f'z on lb <= z <= ub (finite bounds), fixed step 1/L.
inline Eigen::VectorXd projected_gradient(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                                          int max_iter = 2000000) {
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(f.size()).cwiseMax(lb).cwiseMin(ub);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd next = (z - (H * z + f) / L).cwiseMax(lb).cwiseMin(ub);
        const double change = (next - z).lpNorm<Eigen::Infinity>();
        z = next;
        if (change < 1e-16) break;
    }
    return z;
}

/// Exhaustive search over candidate active sets: every subset of at most n rows of
/// [A; -I; I] z <= [b; -lo; hi] is made an equality, the resulting face minimizer is
/// kept if feasible, and the best one wins. Exponential, so only for tiny problems.
inline Eigen::VectorXd enumerate_active_sets(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                                             const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const auto n = f.size();
    const auto m = A.rows();
    Eigen::MatrixXd C(m + 2 * n, n);
    Eigen::VectorXd d(m + 2 * n);
    C << A, -Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n);
    d << b, -lo, hi;
    const auto rows = C.rows();

    Eigen::VectorXd best;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> subset;
    const auto consider = [&] {
        const auto k = static_cast<Eigen::Index>(subset.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
        Eigen::VectorXd rhs(n + k);
        K.topLeftCorner(n, n) = H;
        rhs.head(n) = -f;
        for (Eigen::Index i = 0; i < k; ++i) {
            K.block(n + i, 0, 1, n) = C.row(subset[static_cast<std::size_t>(i)]);
            K.block(0, n + i, n, 1) = C.row(subset[static_cast<std::size_t>(i)]).transpose();
            rhs[n + i] = d[subset[static_cast<std::size_t>(i)]];
        }
        const auto lu = K.fullPivLu();
        if (!lu.isInvertible()) return;
        const Eigen::VectorXd z = lu.solve(rhs).head(n);
        if (((C * z - d).array() > 1e-12 * (1.0 + d.cwiseAbs().maxCoeff())).any()) return;
        const double val = 0.5 * z.dot(H * z) + f.dot(z);
        if (val < best_val) {
            best_val = val;
            best = z;
        }
    };
    const auto recurse = [&](auto&& self, Eigen::Index from) -> void {
        consider();
        if (static_cast<Eigen::Index>(subset.size()) == n) return;
        for (Eigen::Index r = from; r < rows; ++r) {
            subset.push_back(r);
            self(self, r + 1);
            subset.pop_back();
        }
    };
    recurse(recurse, 0);
    return best;
}

}  // namespace oracle
