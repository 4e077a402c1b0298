#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "vvc/grid_model.hpp"

namespace vvc {

/// Thrown when the sweep does not settle; usually means the loading has no solution.
class PowerFlowDiverged : public std::runtime_error {
public:
    PowerFlowDiverged(int iterations, double residual);
    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;  // max per-node complex voltage change between sweeps
    int max_iterations = 100;
};

struct VoltageSolution {
    std::vector<Complex> v;  // per solver node
    int iterations = 0;
    double residual = 0.0;

    /// Complex power delivered into the network by the slack bus.
    Complex slack_power{};
};

/// Backward/forward sweep on the radial tree, flat start at v_slack.
VoltageSolution solve(const PerUnitNetwork& net, const InjectionSet& inj, Complex v_slack,
                      const PowerFlowOptions& opts = {});

/// Solves a batch of independent injection sets. The parallel variant distributes
/// cases over OpenMP threads; both produce identical results.
std::vector<VoltageSolution> solve_batch_serial(const PerUnitNetwork& net, std::span<const InjectionSet> cases,
                                                Complex v_slack, const PowerFlowOptions& opts = {});
std::vector<VoltageSolution> solve_batch(const PerUnitNetwork& net, std::span<const InjectionSet> cases,
                                         Complex v_slack, const PowerFlowOptions& opts = {});

/// Active power dissipated in series elements (shunts are lossless susceptances).
double losses(const VoltageSolution& sol, const PerUnitNetwork& net);

}  // namespace vvc
