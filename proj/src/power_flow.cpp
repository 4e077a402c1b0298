#include "vvc/power_flow.hpp"

#include <cmath>
#include <algorithm>
#include <exception>
#include <string>

namespace vvc {

PowerFlowDiverged::PowerFlowDiverged(int iterations, double residual)
    : std::runtime_error("power flow diverged after " + std::to_string(iterations) +
                         " iterations (last residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

VoltageSolution solve(const PerUnitNetwork& net, const InjectionSet& inj, Complex v_slack,
                      const PowerFlowOptions& opts) {
    const std::size_t n = net.size();
    if (inj.size() != n) throw std::invalid_argument("injection set size does not match network");
    const double mag = std::abs(v_slack);
    if (!(mag >= 0.8 && mag <= 1.2)) throw std::invalid_argument("slack voltage magnitude outside [0.8, 1.2]");
    for (const auto& s : inj.s)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw std::invalid_argument("non-finite injection");

    VoltageSolution sol;
    sol.v.assign(n, v_slack);
    std::vector<Complex> current(n);
    const Complex j{0.0, 1.0};

    for (int it = 1; it <= opts.max_iterations; ++it) {
        // Backward: node draw plus everything downstream, accumulated into the parent edge.
        for (std::size_t k = 0; k < n; ++k)
            current[k] = -std::conj(inj.s[k] / sol.v[k]) + j * net.nodes[k].b_shunt * sol.v[k];
        for (std::size_t k = n; k-- > 1;) current[net.nodes[k].parent] += current[k];

        // Forward: drop along each edge from the (already updated) parent.
        double residual = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const Complex v_new = sol.v[net.nodes[k].parent] - net.nodes[k].z_series * current[k];
            residual = std::max(residual, std::abs(v_new - sol.v[k]));
            sol.v[k] = v_new;
        }
        sol.iterations = it;
        sol.residual = residual;
        if (!std::isfinite(residual)) throw PowerFlowDiverged(it, residual);
        if (residual < opts.tolerance) {
            // Slack balance from currents consistent with the converged voltages.
            for (std::size_t k = 0; k < n; ++k)
                current[k] = -std::conj(inj.s[k] / sol.v[k]) + j * net.nodes[k].b_shunt * sol.v[k];
            for (std::size_t k = n; k-- > 1;) current[net.nodes[k].parent] += current[k];
            sol.slack_power = sol.v[0] * std::conj(current[0]);
            return sol;
        }
    }
    throw PowerFlowDiverged(opts.max_iterations, sol.residual);
}

std::vector<VoltageSolution> solve_batch_serial(const PerUnitNetwork& net, std::span<const InjectionSet> cases,
                                                Complex v_slack, const PowerFlowOptions& opts) {
    std::vector<VoltageSolution> out;
    out.reserve(cases.size());
    for (const auto& c : cases) out.push_back(solve(net, c, v_slack, opts));
    return out;
}

std::vector<VoltageSolution> solve_batch(const PerUnitNetwork& net, std::span<const InjectionSet> cases,
                                         Complex v_slack, const PowerFlowOptions& opts) {
    std::vector<VoltageSolution> out(cases.size());
    const auto n = static_cast<std::ptrdiff_t>(cases.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = solve(net, cases[i], v_slack, opts);
        } catch (...) {
#pragma omp critical(vvc_pf_batch_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

double losses(const VoltageSolution& sol, const PerUnitNetwork& net) {
    double total = 0.0;
    for (std::size_t k = 1; k < net.size(); ++k) {
        const auto& node = net.nodes[k];
        if (node.z_series == Complex{}) continue;
        const Complex i = (sol.v[node.parent] - sol.v[k]) / node.z_series;
        total += std::norm(i) * node.z_series.real();
    }
    return total;
}

}  // namespace vvc
