#include "vvc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vvc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_norm(const Eigen::VectorXd& v) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::isfinite(v[i])) m = std::max(m, std::abs(v[i]));
    return m;
}

/// All constraints as rows c_i z <= d_i, general rows first, then finite lower and upper bounds.
struct ConstraintSet {
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
    std::vector<Eigen::Index> external;  // index in the documented numbering
};

ConstraintSet gather(const QpProblem& qp) {
    const auto n = qp.variables();
    const auto m = qp.A.rows();
    std::vector<Eigen::Index> lower, upper;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(qp.lb[j])) lower.push_back(j);
        if (std::isfinite(qp.ub[j])) upper.push_back(j);
    }
    ConstraintSet cs;
    const auto rows = m + static_cast<Eigen::Index>(lower.size() + upper.size());
    cs.C = Eigen::MatrixXd::Zero(rows, n);
    cs.d.resize(rows);
    if (m > 0) {
        cs.C.topRows(m) = qp.A;
        cs.d.head(m) = qp.b;
    }
    for (Eigen::Index i = 0; i < m; ++i) cs.external.push_back(i);
    Eigen::Index r = m;
    for (const auto j : lower) {
        cs.C(r, j) = -1.0;
        cs.d[r++] = -qp.lb[j];
        cs.external.push_back(m + j);
    }
    for (const auto j : upper) {
        cs.C(r, j) = 1.0;
        cs.d[r++] = qp.ub[j];
        cs.external.push_back(m + n + j);
    }
    return cs;
}

double max_violation(const ConstraintSet& cs, const Eigen::VectorXd& z) {
    if (cs.d.size() == 0) return 0.0;
    return std::max(0.0, (cs.C * z - cs.d).maxCoeff());
}

double primal_scale(const ConstraintSet& cs) { return std::max(1.0, cs.d.size() ? cs.d.cwiseAbs().maxCoeff() : 0.0); }

/// Equality-constrained step for working set W: min 0.5 p'Hp + g'p s.t. C_W p = 0,
/// via the Schur complement C_W H^-1 C_W'.
struct EqpResult {
    Eigen::VectorXd p;
    Eigen::VectorXd lambda;
};

EqpResult solve_eqp(const Eigen::LLT<Eigen::MatrixXd>& chol, const ConstraintSet& cs,
                    const std::vector<Eigen::Index>& W, const Eigen::VectorXd& g) {
    const auto n = g.size();
    const auto L = chol.matrixL();
    Eigen::VectorXd Lg = L.solve(g);
    EqpResult r;
    if (W.empty()) {
        r.p = -chol.matrixU().solve(Lg);
        return r;
    }
    Eigen::MatrixXd Cw(static_cast<Eigen::Index>(W.size()), n);
    for (std::size_t k = 0; k < W.size(); ++k) Cw.row(static_cast<Eigen::Index>(k)) = cs.C.row(W[k]);
    const Eigen::MatrixXd Y = L.solve(Cw.transpose());
    const Eigen::MatrixXd S = Y.transpose() * Y;
    r.lambda = S.ldlt().solve(-(Y.transpose() * Lg));
    r.p = -chol.matrixU().solve(Lg + Y * r.lambda);
    return r;
}

/// Exact minimizer on the face defined by W: H z + f + C_W' lambda = 0, C_W z = d_W.
EqpResult solve_face(const Eigen::LLT<Eigen::MatrixXd>& chol, const ConstraintSet& cs,
                     const std::vector<Eigen::Index>& W, const Eigen::VectorXd& f) {
    const auto n = f.size();
    const auto L = chol.matrixL();
    Eigen::VectorXd Lf = L.solve(f);
    EqpResult r;
    if (W.empty()) {
        r.p = -chol.matrixU().solve(Lf);
        return r;
    }
    Eigen::MatrixXd Cw(static_cast<Eigen::Index>(W.size()), n);
    Eigen::VectorXd dw(static_cast<Eigen::Index>(W.size()));
    for (std::size_t k = 0; k < W.size(); ++k) {
        Cw.row(static_cast<Eigen::Index>(k)) = cs.C.row(W[k]);
        dw[static_cast<Eigen::Index>(k)] = cs.d[W[k]];
    }
    const Eigen::MatrixXd Y = L.solve(Cw.transpose());
    const Eigen::MatrixXd S = Y.transpose() * Y;
    r.lambda = S.ldlt().solve(-(dw + Y.transpose() * Lf));
    r.p = -chol.matrixU().solve(Lf + Y * r.lambda);
    return r;
}

struct ActiveSetResult {
    Eigen::VectorXd z;
    Eigen::VectorXd lambda;  // per internal row
    std::vector<Eigen::Index> W;
    int iterations = 0;
};

ActiveSetResult active_set(const QpProblem& qp, const ConstraintSet& cs, const Eigen::LLT<Eigen::MatrixXd>& chol,
                           Eigen::VectorXd z, int max_iterations) {
    const auto rows = cs.d.size();
    std::vector<Eigen::Index> W;
    std::vector<char> in_w(static_cast<std::size_t>(rows), 0);
    ActiveSetResult out;
    Eigen::VectorXd row_norm = cs.C.rowwise().norm();
    bool degenerate = false;  // last step had zero length
    bool at_face_minimum = false;

    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        const Eigen::VectorXd g = qp.H * z + qp.f;
        const auto step = solve_eqp(chol, cs, W, g);
        const double p_norm = step.p.lpNorm<Eigen::Infinity>();

        // A full unblocked step lands on the face minimizer; what remains of p is rounding.
        if (at_face_minimum || p_norm <= 1e-10 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
            at_face_minimum = false;
            const double lam_tol = 1e-13 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
            Eigen::Index drop = -1;
            double most_negative = -lam_tol;
            for (std::size_t k = 0; k < W.size(); ++k) {
                const double lam = step.lambda[static_cast<Eigen::Index>(k)];
                if (lam >= -lam_tol) continue;
                // After a zero-length step switch to the lowest-index rule, which cannot cycle.
                const bool better = degenerate ? (drop < 0 || W[k] < W[static_cast<std::size_t>(drop)])
                                               : (lam < most_negative ||
                                                  (lam == most_negative && W[k] < W[static_cast<std::size_t>(drop)]));
                if (better) {
                    most_negative = lam;
                    drop = static_cast<Eigen::Index>(k);
                }
            }
            if (drop < 0) {
                out.z = z;
                out.W = W;
                out.lambda = Eigen::VectorXd::Zero(rows);
                for (std::size_t k = 0; k < W.size(); ++k) out.lambda[W[k]] = step.lambda[static_cast<Eigen::Index>(k)];
                return out;
            }
            in_w[static_cast<std::size_t>(W[static_cast<std::size_t>(drop)])] = 0;
            W.erase(W.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (in_w[static_cast<std::size_t>(i)]) continue;
            const double cp = cs.C.row(i).dot(step.p);
            if (cp <= 1e-12 * row_norm[i] * p_norm) continue;
            const double a = std::max(0.0, (cs.d[i] - cs.C.row(i).dot(z)) / cp);
            if (a < alpha) {
                alpha = a;
                blocking = i;
            }
        }
        degenerate = alpha == 0.0;
        at_face_minimum = blocking < 0;
        z += alpha * step.p;
        if (blocking >= 0) {
            W.push_back(blocking);
            in_w[static_cast<std::size_t>(blocking)] = 1;
        }
    }
    KktResiduals none;
    none.primal = max_violation(cs, z) / primal_scale(cs);
    throw QpSolverError("active-set iteration limit reached", max_iterations, none);
}

/// Finds a point satisfying all constraints by penalizing a shared violation variable.
Eigen::VectorXd feasible_point(const QpProblem& qp, const ConstraintSet& cs, int max_iterations) {
    const auto n = qp.variables();
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) z0[j] = std::clamp(0.0, qp.lb[j], qp.ub[j]);
    if (max_violation(cs, z0) == 0.0) return z0;

    const auto m = qp.A.rows();
    const double violation = m > 0 ? std::max(0.0, (qp.A * z0 - qp.b).maxCoeff()) : 0.0;
    for (double c = 1e3; c <= 1e13; c *= 100.0) {
        QpProblem aux;
        aux.H = Eigen::MatrixXd::Identity(n + 1, n + 1);
        aux.f = Eigen::VectorXd::Zero(n + 1);
        aux.f.head(n) = -z0;
        aux.f[n] = c;
        aux.A.resize(m, n + 1);
        aux.A.leftCols(n) = qp.A;
        aux.A.col(n).setConstant(-1.0);
        aux.b = qp.b;
        aux.lb.resize(n + 1);
        aux.ub.resize(n + 1);
        aux.lb.head(n) = qp.lb;
        aux.ub.head(n) = qp.ub;
        aux.lb[n] = 0.0;
        aux.ub[n] = kInf;
        Eigen::VectorXd s(n + 1);
        s.head(n) = z0;
        s[n] = violation + 1e-3 * (1.0 + violation);  // strictly inside every row
        aux.start = s;
        const auto sol = solve_qp(aux, {max_iterations, 1e-8});
        if (sol.z[n] == 0.0 || max_violation(cs, sol.z.head(n)) <= 1e-12 * primal_scale(cs))
            return sol.z.head(n);
    }
    throw QpSolverError("constraints are infeasible", 0, KktResiduals{0.0, max_violation(cs, z0), 0.0, 0.0});
}

}  // namespace

void QpProblem::validate() const {
    const auto n = H.rows();
    if (H.cols() != n || f.size() != n || lb.size() != n || ub.size() != n)
        throw std::invalid_argument("QP: Hessian, gradient and bounds must agree in size");
    if (A.cols() != n && A.rows() > 0) throw std::invalid_argument("QP: constraint matrix has wrong column count");
    if (A.rows() != b.size()) throw std::invalid_argument("QP: constraint rows and right-hand side disagree");
    if (!H.allFinite() || !f.allFinite() || !A.allFinite() || !b.allFinite())
        throw std::invalid_argument("QP: non-finite data");
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("QP: Hessian is not symmetric");
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(lb[j] <= ub[j])) throw std::invalid_argument("QP: lower bound exceeds upper bound on variable " + std::to_string(j));
    if (start && start->size() != n) throw std::invalid_argument("QP: start point has wrong size");
}

double KktResiduals::max() const { return std::max({stationarity, primal, dual, complementarity}); }

KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z, const Eigen::VectorXd& lambda_general,
                           const Eigen::VectorXd& lambda_lower, const Eigen::VectorXd& lambda_upper) {
    const auto n = qp.variables();
    const Eigen::VectorXd Hz = qp.H * z;
    Eigen::VectorXd grad = Hz + qp.f - lambda_lower + lambda_upper;
    if (qp.A.rows() > 0) grad += qp.A.transpose() * lambda_general;
    const double dual_scale = std::max({1.0, Hz.lpNorm<Eigen::Infinity>(), qp.f.lpNorm<Eigen::Infinity>()});
    const double p_scale = std::max({1.0, qp.b.size() ? qp.b.cwiseAbs().maxCoeff() : 0.0, finite_norm(qp.lb),
                                     finite_norm(qp.ub)});

    KktResiduals r;
    r.stationarity = grad.lpNorm<Eigen::Infinity>() / dual_scale;

    double viol = 0.0, neg = 0.0, comp = 0.0, lam_max = 0.0;
    const auto account = [&](double slack, double lam) {
        viol = std::max(viol, -slack);
        neg = std::max(neg, -lam);
        lam_max = std::max(lam_max, std::abs(lam));
        comp = std::max(comp, std::abs(lam * slack));
    };
    if (qp.A.rows() > 0) {
        const Eigen::VectorXd slack = qp.b - qp.A * z;
        for (Eigen::Index i = 0; i < slack.size(); ++i) account(slack[i], lambda_general[i]);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(qp.lb[j])) account(z[j] - qp.lb[j], lambda_lower[j]);
        else neg = std::max(neg, std::abs(lambda_lower[j]));
        if (std::isfinite(qp.ub[j])) account(qp.ub[j] - z[j], lambda_upper[j]);
        else neg = std::max(neg, std::abs(lambda_upper[j]));
    }
    r.primal = std::max(0.0, viol) / p_scale;
    r.dual = neg / dual_scale;
    r.complementarity = comp / (std::max(1.0, lam_max) * std::max(p_scale, z.lpNorm<Eigen::Infinity>()));
    return r;
}

QpSolution solve_qp(const QpProblem& qp, const QpOptions& opts) {
    qp.validate();
    const auto n = qp.variables();
    const auto m = qp.A.rows();
    const Eigen::LLT<Eigen::MatrixXd> chol(qp.H);
    if (chol.info() != Eigen::Success) throw std::invalid_argument("QP: Hessian is not positive definite");

    const auto cs = gather(qp);
    const int max_it = opts.max_iterations > 0 ? opts.max_iterations : 10 * static_cast<int>(n + cs.d.size()) + 10;

    Eigen::VectorXd z0;
    if (qp.start && max_violation(cs, *qp.start) <= 1e-12 * primal_scale(cs)) z0 = *qp.start;
    else z0 = feasible_point(qp, cs, max_it);

    auto result = active_set(qp, cs, chol, z0, max_it);

    // Re-solve the final face directly to remove step accumulation error.
    const auto face = solve_face(chol, cs, result.W, qp.f);
    bool polished = max_violation(cs, face.p) <= max_violation(cs, result.z) + 1e-15 * primal_scale(cs);
    const double lam_floor = -1e-12 * std::max(1.0, face.lambda.size() ? face.lambda.cwiseAbs().maxCoeff() : 0.0);
    for (Eigen::Index k = 0; polished && k < face.lambda.size(); ++k) polished = face.lambda[k] >= lam_floor;

    QpSolution sol;
    sol.iterations = result.iterations;
    sol.z = polished ? face.p : result.z;
    sol.lambda_general = Eigen::VectorXd::Zero(m);
    sol.lambda_lower = Eigen::VectorXd::Zero(n);
    sol.lambda_upper = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < result.W.size(); ++k) {
        const auto row = result.W[k];
        const double lam = polished ? face.lambda[static_cast<Eigen::Index>(k)] : result.lambda[row];
        const auto ext = cs.external[static_cast<std::size_t>(row)];
        // Variables held at a bound sit exactly on it.
        if (ext < m) sol.lambda_general[ext] = lam;
        else if (ext < m + n) sol.lambda_lower[ext - m] = lam, sol.z[ext - m] = qp.lb[ext - m];
        else sol.lambda_upper[ext - m - n] = lam, sol.z[ext - m - n] = qp.ub[ext - m - n];
        sol.active_set.push_back(ext);
    }
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.objective = qp.objective(sol.z);
    sol.kkt = kkt_residuals(qp, sol.z, sol.lambda_general, sol.lambda_lower, sol.lambda_upper);
    if (sol.kkt.max() > opts.kkt_tolerance)
        throw QpSolverError("KKT residuals above tolerance", sol.iterations, sol.kkt);
    return sol;
}

}  // namespace vvc
