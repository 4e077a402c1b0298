#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vvc/plant_sim.hpp"

namespace vvc {

/// Names of the model's output, input and measured-disturbance channels.
struct ChannelRegistry {
    std::vector<std::string> outputs;
    std::vector<std::string> inputs;
    std::vector<std::string> disturbances;

    void validate() const;
};

/// Truncated impulse-response model y(k) = sum_{i=1..M} g_i u(k-i) + gamma_i d(k-i) in
/// deviation coordinates around the baselines y0, u0, d0.
struct ImpulseResponseModel {
    int M = 0;
    double T = 0.0;
    std::string operating_point;
    ChannelRegistry channels;
    std::vector<Eigen::MatrixXd> g;      // g[i-1] is g_i, ny x nu
    std::vector<Eigen::MatrixXd> gamma;  // gamma[i-1] is gamma_i, ny x nd
    Eigen::VectorXd y0;                  // outputs at the identification steady state
    Eigen::VectorXd u0;                  // inputs at the identification steady state
    Eigen::VectorXd d0;                  // disturbances at the identification steady state

    Eigen::Index ny() const { return y0.size(); }
    Eigen::Index nu() const { return u0.size(); }
    Eigen::Index nd() const { return d0.size(); }

    /// ||g_M||_inf / max_i ||g_i||_inf over the input coefficients.
    double exhaustion_ratio() const;
    /// Throws std::invalid_argument when sizes disagree.
    void validate() const;
};

void save_model(const ImpulseResponseModel& model, const std::filesystem::path& path);
ImpulseResponseModel load_model(const std::filesystem::path& path);
std::string model_to_json(const ImpulseResponseModel& model);
ImpulseResponseModel model_from_json(const std::string& text);

/// A plant that can be cloned and driven sample by sample for pulse experiments.
/// Inputs are absolute; disturbances are additive deviations held for one step.
class PulsePlant {
public:
    virtual ~PulsePlant() = default;
    virtual std::unique_ptr<PulsePlant> clone() const = 0;
    virtual Eigen::Index outputs() const = 0;
    virtual Eigen::Index inputs() const = 0;
    virtual Eigen::Index disturbances() const = 0;
    virtual Eigen::VectorXd nominal_input() const = 0;
    virtual Eigen::VectorXd nominal_disturbance() const = 0;
    virtual Eigen::VectorXd output() const = 0;
    virtual Eigen::VectorXd step(const Eigen::VectorXd& u, const Eigen::VectorXd& d_offset) = 0;
    /// Admissible range of input j; pulses are flipped to stay inside it.
    virtual std::pair<double, double> input_range(Eigen::Index) const {
        return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    virtual ChannelRegistry registry() const;
};

/// Discrete LTI plant x+ = A x + B u + E d, y = C x.
class StateSpacePlant final : public PulsePlant {
public:
    StateSpacePlant(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd E = {});

    std::unique_ptr<PulsePlant> clone() const override { return std::make_unique<StateSpacePlant>(*this); }
    Eigen::Index outputs() const override { return C_.rows(); }
    Eigen::Index inputs() const override { return B_.cols(); }
    Eigen::Index disturbances() const override { return E_.cols(); }
    Eigen::VectorXd nominal_input() const override { return Eigen::VectorXd::Zero(inputs()); }
    Eigen::VectorXd nominal_disturbance() const override { return Eigen::VectorXd::Zero(disturbances()); }
    Eigen::VectorXd output() const override { return C_ * x_; }
    Eigen::VectorXd step(const Eigen::VectorXd& u, const Eigen::VectorXd& d_offset) override;

    const Eigen::VectorXd& state() const { return x_; }
    void set_state(Eigen::VectorXd x) { x_ = std::move(x); }

private:
    Eigen::MatrixXd A_, B_, C_, E_;
    Eigen::VectorXd x_;
};

/// The network plant seen through its power-factor inputs, controlled-bus voltages, and
/// the active power / exogenous reactive offset of the measured generators.
class NetworkPulsePlant final : public PulsePlant {
public:
    NetworkPulsePlant(Plant plant, std::vector<std::string> measured_generators, Eigen::VectorXd nominal_pf);

    std::unique_ptr<PulsePlant> clone() const override { return std::make_unique<NetworkPulsePlant>(*this); }
    Eigen::Index outputs() const override;
    Eigen::Index inputs() const override;
    Eigen::Index disturbances() const override;
    Eigen::VectorXd nominal_input() const override { return nominal_pf_; }
    Eigen::VectorXd nominal_disturbance() const override;
    Eigen::VectorXd output() const override;
    Eigen::VectorXd step(const Eigen::VectorXd& u, const Eigen::VectorXd& d_offset) override;
    std::pair<double, double> input_range(Eigen::Index) const override;
    ChannelRegistry registry() const override;

    const Plant& plant() const { return plant_; }

private:
    Plant plant_;
    std::vector<std::size_t> measured_;
    Eigen::VectorXd nominal_pf_;
    Eigen::VectorXd applied_offset_;
};

/// Disturbance vector of the measured generators: active powers followed by exogenous
/// reactive offsets, p.u. on the system base.
Eigen::VectorXd measured_disturbance(const Measurements& m, const std::vector<std::size_t>& measured_generators);
std::vector<std::size_t> generator_indices(const NetworkModel& model, const std::vector<std::string>& ids);

class IdentificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IdentifyOptions {
    int M = 90;
    double T = 2.0;
    std::string operating_point;
    Eigen::VectorXd input_amplitudes;        // one per input; default 0.02
    Eigen::VectorXd disturbance_amplitudes;  // one per disturbance; default 0.05
};

/// One-sample pulse experiment per channel, channels distributed over OpenMP threads.
ImpulseResponseModel identify(const PulsePlant& settled, IdentifyOptions opts);
/// Same experiments run one after another; reference for the parallel version.
ImpulseResponseModel identify_serial(const PulsePlant& settled, IdentifyOptions opts);

struct LinearityReport {
    std::vector<std::string> channels;  // inputs followed by disturbances
    std::vector<double> deviation;      // max |g(a1) - g(a2)| / max |g(a1)| per channel

    double max_deviation() const;
};

/// Identifies the plant at two amplitude sets and compares the normalized responses.
LinearityReport validate_linearity(const ImpulseResponseModel& model, const PulsePlant& settled,
                                   const std::pair<Eigen::VectorXd, Eigen::VectorXd>& input_amplitudes,
                                   const std::pair<Eigen::VectorXd, Eigen::VectorXd>& disturbance_amplitudes);

}  // namespace vvc
