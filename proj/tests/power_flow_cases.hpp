#pragma once
// Power-flow fixtures shared by the unit tests and the acceptance run.

#include <random>
#include <vector>

#include "vvc/power_flow.hpp"

namespace testing_support {

inline vvc::PerUnitNetwork two_bus(vvc::Complex z) {
    vvc::PerUnitNetwork net;
    net.nodes.push_back({"A", 0, {}, 0.0, false, 0});
    net.nodes.push_back({"B", 0, z, 0.0, false, 1});
    return net;
}

inline double max_diff(const std::vector<vvc::Complex>& a, const std::vector<vvc::Complex>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Random injections around an operating point: loads scaled, DG reactive power added.
inline vvc::InjectionSet randomized(const vvc::NetworkModel& m, const vvc::PerUnitNetwork& net, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> op(0, 3);
    std::uniform_real_distribution<double> scale(0.5, 1.5), q(-0.02, 0.02);
    auto inj = vvc::operating_point(m, net, static_cast<vvc::OperatingPoint>(op(rng)));
    for (std::size_t k = 1; k < inj.size(); ++k) inj.s[k] *= scale(rng);
    for (const auto& g : m.generators) inj.s[net.bus_node[*m.bus_index(g.bus)]] += vvc::Complex{0.0, q(rng)};
    return inj;
}

}  // namespace testing_support
