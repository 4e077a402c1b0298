#include "vvc/oltc.hpp"

#include <cmath>
#include <stdexcept>

namespace vvc {

int OltcOptions::dwell_samples() const {
    if (!(sample_time_s > 0.0) || !(dwell_time_s >= 0.0))
        throw std::invalid_argument("dwell time must be nonnegative and sample time positive");
    // Tolerate dwell times that are an exact multiple of T up to rounding.
    const int n = static_cast<int>(std::ceil(dwell_time_s / sample_time_s - 1e-9));
    return n < 1 ? 1 : n;
}

OltcSupervisor::OltcSupervisor(OltcOptions opts) : opts_(opts), dwell_(opts_.dwell_samples()) {
    if (!(opts_.deadband >= 0.0)) throw std::invalid_argument("deadband must be nonnegative");
}

int OltcSupervisor::supervise(double eps1, double eps2) {
    if (lockout_ > 0) --lockout_;

    const double diff = eps2 - eps1;
    const int dir = diff > opts_.deadband ? 1 : (diff < -opts_.deadband ? -1 : 0);
    if (dir == 0) {
        persistence_ = 0;
    } else if (dir != direction_) {
        persistence_ = 1;
    } else {
        ++persistence_;
    }
    direction_ = dir;

    last_command_ = 0;
    if (dir != 0 && persistence_ >= dwell_ && lockout_ == 0) {
        last_command_ = dir;
        persistence_ = 0;
        lockout_ = dwell_;
    }
    return last_command_;
}

}  // namespace vvc
