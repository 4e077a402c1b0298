#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vvc {

/// min 0.5 z'Hz + f'z + constant  s.t.  A z <= b,  lb <= z <= ub.
/// Infinite bounds are allowed and ignored.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd f;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd lb;
    Eigen::VectorXd ub;
    double constant = 0.0;
    std::optional<Eigen::VectorXd> start;  // feasible initial point, if known

    Eigen::Index variables() const { return H.rows(); }
    double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + f.dot(z) + constant; }
    /// Throws std::invalid_argument on inconsistent sizes, asymmetric H or lb > ub.
    void validate() const;
};

/// Scaled KKT residuals of a candidate solution.
struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;

    double max() const;
};

struct QpSolution {
    Eigen::VectorXd z;
    double objective = 0.0;
    Eigen::VectorXd lambda_general;  // multipliers of A z <= b
    Eigen::VectorXd lambda_lower;    // multipliers of z >= lb
    Eigen::VectorXd lambda_upper;    // multipliers of z <= ub
    /// Active constraints: general rows 0..m-1, lower bounds m..m+n-1, upper bounds m+n..m+2n-1.
    std::vector<Eigen::Index> active_set;
    KktResiduals kkt;
    int iterations = 0;
};

class QpSolverError : public std::runtime_error {
public:
    QpSolverError(const std::string& what, int iterations, KktResiduals residuals)
        : std::runtime_error(what), iterations_(iterations), residuals_(residuals) {}
    int iterations() const { return iterations_; }
    const KktResiduals& residuals() const { return residuals_; }

private:
    int iterations_;
    KktResiduals residuals_;
};

struct QpOptions {
    int max_iterations = 0;     // 0 picks 10 (n + rows)
    double kkt_tolerance = 1e-8;
};

KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda_general,
                           const Eigen::VectorXd& lambda_lower, const Eigen::VectorXd& lambda_upper);

/// Primal active-set method with Cholesky factorization of H and range-space equality
/// sub-problems. Pivoting: drop the most negative multiplier, add the first blocking
/// constraint; ties go to the lowest constraint index.
QpSolution solve_qp(const QpProblem& qp, const QpOptions& opts = {});

}  // namespace vvc
