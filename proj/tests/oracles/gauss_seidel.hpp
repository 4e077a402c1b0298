#pragma once
// Bus-admittance Gauss-Seidel power flow, kept independent of the sweep solver.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "vvc/grid_model.hpp"

namespace oracle {

using C = std::complex<double>;

struct Admittance {
    std::vector<C> diag;
    std::vector<std::vector<std::pair<std::size_t, C>>> off;  // off-diagonal entries per row
};

inline Admittance build_ybus(const vvc::PerUnitNetwork& net) {
    const auto n = net.size();
    Admittance y{std::vector<C>(n), std::vector<std::vector<std::pair<std::size_t, C>>>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        y.diag[k] += C{0.0, net.nodes[k].b_shunt};
        if (k == 0) continue;
        const auto p = net.nodes[k].parent;
        const C ys = 1.0 / net.nodes[k].z_series;
        y.diag[k] += ys;
        y.diag[p] += ys;
        y.off[k].push_back({p, -ys});
        y.off[p].push_back({k, -ys});
    }
    return y;
}

/// Node 0 is the slack. Iterates until the largest update is below tol.
inline std::vector<C> gauss_seidel(const vvc::PerUnitNetwork& net, const std::vector<C>& s, C v_slack,
                                   double tol = 1e-13, int max_iter = 500000) {
    const auto y = build_ybus(net);
    std::vector<C> v(net.size(), v_slack);
    for (int it = 0; it < max_iter; ++it) {
        double change = 0.0;
        for (std::size_t k = 1; k < v.size(); ++k) {
            C acc = std::conj(s[k] / v[k]);
            for (const auto& [j, yk] : y.off[k]) acc -= yk * v[j];
            const C vn = acc / y.diag[k];
            change = std::max(change, std::abs(vn - v[k]));
            v[k] = vn;
        }
        if (change < tol) return v;
    }
    throw std::runtime_error("Gauss-Seidel oracle did not converge");
}

}  // namespace oracle
