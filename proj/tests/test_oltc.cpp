#include <random>
#include <vector>

#include "doctest.h"
#include "slack_streams.hpp"
#include "support.hpp"
#include "vvc/oltc.hpp"
#include "vvc/plant_sim.hpp"

using namespace vvc;

namespace {

std::vector<int> run(OltcSupervisor s, const std::vector<std::pair<double, double>>& slacks) {
    std::vector<int> cmds;
    for (const auto& [e1, e2] : slacks) cmds.push_back(s.supervise(e1, e2));
    return cmds;
}

}  // namespace

TEST_CASE("dwell time in samples") {
    CHECK(OltcOptions{}.dwell_samples() == 38);
    CHECK(OltcOptions{76.0, 2.0}.dwell_samples() == 38);
    CHECK(OltcOptions{0.0, 2.0}.dwell_samples() == 1);
    CHECK(OltcOptions{0.3, 0.1}.dwell_samples() == 3);
    CHECK_THROWS_AS(OltcOptions({75.0, 0.0}).dwell_samples(), std::invalid_argument);
    CHECK_THROWS_AS(OltcSupervisor(OltcOptions{75.0, 2.0, -1.0}), std::invalid_argument);
}

TEST_CASE("no slack activity never moves the tap") {
    OltcSupervisor s;
    for (int k = 0; k < 1000; ++k) CHECK(s.supervise(0.0, 0.0) == 0);
}

TEST_CASE("sustained upper violation issues one command after the dwell time") {
    OltcSupervisor s;
    std::vector<int> cmds;
    for (int k = 0; k < 38; ++k) cmds.push_back(s.supervise(0.0, 0.01));
    for (int k = 0; k < 37; ++k) CHECK(cmds[static_cast<std::size_t>(k)] == 0);
    CHECK(cmds[37] == 1);
    CHECK(s.lockout() == 38);
    CHECK(s.persistence() == 0);
    // Still violated: the next command needs a full new dwell.
    int next = -1;
    for (int k = 1; k <= 100 && next < 0; ++k)
        if (s.supervise(0.0, 0.01) != 0) next = k;
    CHECK(next == 38);
}

TEST_CASE("a violation that clears one sample early resets the count") {
    OltcSupervisor s;
    for (int k = 0; k < 37; ++k) CHECK(s.supervise(0.0, 0.01) == 0);
    for (int k = 0; k < 500; ++k) CHECK(s.supervise(0.0, 0.0) == 0);
    CHECK(s.persistence() == 0);
}

TEST_CASE("equal slacks cancel") {
    OltcSupervisor s;
    for (int k = 0; k < 200; ++k) CHECK(s.supervise(0.01, 0.01) == 0);
}

TEST_CASE("dead-band suppresses numerical noise") {
    OltcSupervisor s;
    for (int k = 0; k < 200; ++k) CHECK(s.supervise(0.0, 5e-7) == 0);
    for (int k = 0; k < 200; ++k) CHECK(s.supervise(3e-7, 0.0) == 0);
}

TEST_CASE("a sign change restarts the count") {
    OltcSupervisor s;
    for (int k = 0; k < 30; ++k) s.supervise(0.0, 0.01);
    std::vector<int> cmds;
    for (int k = 0; k < 38; ++k) cmds.push_back(s.supervise(0.01, 0.0));
    for (int k = 0; k < 37; ++k) CHECK(cmds[static_cast<std::size_t>(k)] == 0);
    CHECK(cmds[37] == -1);
}

TEST_CASE("randomized streams") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        OltcOptions o;
        o.dwell_time_s = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
        const auto stream = testing_support::random_slack_stream(rng, 2000);
        OltcSupervisor s(o);
        const int dwell = s.dwell_samples();
        int last = -1'000'000;
        bool ok = true;
        std::vector<int> cmds;
        for (std::size_t k = 0; k < stream.size(); ++k) {
            const int c = s.supervise(stream[k].first, stream[k].second);
            cmds.push_back(c);
            ok = ok && s.persistence() >= 0 && s.lockout() >= 0 && s.lockout() <= dwell;
            if (c == 0) continue;
            // The command follows the sign of eps2 - eps1, and commands are at least a dwell apart.
            ok = ok && c == (stream[k].second > stream[k].first ? 1 : -1);
            ok = ok && static_cast<int>(k) - last >= dwell;
            ok = ok && s.lockout() == dwell;
            last = static_cast<int>(k);
        }
        CHECK(ok);

        std::vector<std::pair<double, double>> swapped;
        for (const auto& [a, b] : stream) swapped.emplace_back(b, a);
        const auto mirrored = run(OltcSupervisor(o), swapped);
        bool negated = true;
        for (std::size_t k = 0; k < cmds.size(); ++k) negated = negated && mirrored[k] == -cmds[k];
        CHECK(negated);
        CHECK(run(OltcSupervisor(o), stream) == cmds);
    }
}

TEST_CASE("the upper-violation command lowers the busbar voltage") {
    OltcSupervisor s;
    int cmd = 0;
    while (cmd == 0) cmd = s.supervise(0.0, 0.02);
    Plant plant(testing_support::benchmark(), OperatingPoint::Am7);
    const std::vector<double> unity(8, 1.0);
    const auto before = plant.step(unity, 0);
    const double busbar = plant.slack_voltage();
    const auto after = plant.step(unity, cmd);
    CHECK(plant.tap() == 1);
    CHECK(plant.slack_voltage() < busbar);
    for (std::size_t i = 0; i < after.v_controlled.size(); ++i) CHECK(after.v_controlled[i] < before.v_controlled[i]);
}
