#pragma once

namespace vvc {

struct OltcOptions {
    double dwell_time_s = 75.0;
    double sample_time_s = 2.0;
    double deadband = 1e-6;

    /// ceil(dwell / T), at least one sample.
    int dwell_samples() const;
};

/// Turns sustained slack activity into tap commands. +1 raises the tap index, which lowers
/// the busbar voltage; -1 raises it.
class OltcSupervisor {
public:
    explicit OltcSupervisor(OltcOptions opts = {});

    int supervise(double eps1, double eps2);

    int dwell_samples() const { return dwell_; }
    int persistence() const { return persistence_; }
    int lockout() const { return lockout_; }
    int last_command() const { return last_command_; }

private:
    OltcOptions opts_;
    int dwell_;
    int direction_ = 0;
    int persistence_ = 0;
    int lockout_ = 0;
    int last_command_ = 0;
};

}  // namespace vvc
