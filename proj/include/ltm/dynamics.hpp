#pragma once

// Time-domain integration of the coupled population / photon-number system.
//
// The state holds one PopulationState per sub-ensemble plus the shared photon
// number n. Integration uses a fourth-order Rosenbrock scheme with an analytic
// Jacobian; the rate spread (1e6 .. 1e12 rad/s) rules out explicit methods.

#include <iosfwd>
#include <vector>

#include "ltm/model.hpp"
#include "ltm/rate_equations.hpp"
#include "ltm/steady_state.hpp"

namespace ltm {

struct StateVector {
    std::vector<PopulationState> ensembles;  // ordered as sub_ensembles(config)
    double n = 0;

    /// Weight-averaged populations over sub-ensembles.
    PopulationState average(const ModelConfig& config) const;
    static StateVector from_steady_state(const SteadyStateResult& ss);
};

enum class ModulationKind { constant, step, sinusoid };

/// Time dependence of the detuning seen by the field-aligned sub-ensemble.
struct DriveModulation {
    ModulationKind kind = ModulationKind::constant;
    double delta_before = 0;  // rad/s; the constant detuning for kind == constant
    double delta_after = 0;   // rad/s
    double step_time = 0;     // s
    double bias_field = 0;    // B_o, tesla
    double amplitude = 0;     // B_S, tesla
    double angular_frequency = 0;  // rad/s

    static DriveModulation constant(double delta);
    static DriveModulation step(double delta_before, double delta_after, double step_time);
    /// B(t) = B_o + B_S cos(omega t).
    static DriveModulation sinusoid(double bias_field, double amplitude, double angular_frequency);

    void check() const;
    double detuning(double t, const PhysicalConstants& constants) const;
    double detuning_rate(double t, const PhysicalConstants& constants) const;
};

struct TimeSeries {
    std::vector<double> t;
    std::vector<StateVector> states;
    ModelConfig config;
};

struct IntegratorOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-14;
    double initial_step = 1e-12;  // s
    double min_step = 1e-22;      // s; below this the step is declared underflowed
    long max_steps = 20'000'000;
};

/// Bookkeeping of one integrate() call.
struct IntegrationStats {
    long accepted = 0;
    long rejected = 0;
    long clamped = 0;  // samples where a tiny negative n or occupation was clipped
    double max_trace_drift = 0;
};

/// d/dt of `state` at time t, evaluated term by term on the equations of motion.
StateVector rhs(const StateVector& state, const ModelConfig& config, double t, const DriveModulation& modulation);

/// Integrates to t_end recording every accepted step (plus t = 0).
TimeSeries integrate(const ModelConfig& config, const StateVector& initial, double t_end,
                     const DriveModulation& modulation, const IntegratorOptions& options = {},
                     IntegrationStats* stats = nullptr);

/// Integrates from t = 0 recording the state exactly at each of `sample_times`
/// (strictly increasing, >= 0). The integrator lands on every sample.
TimeSeries integrate_sampled(const ModelConfig& config, const StateVector& initial,
                             const std::vector<double>& sample_times, const DriveModulation& modulation,
                             const IntegratorOptions& options = {}, IntegrationStats* stats = nullptr);

/// Slowest decay time 1 / min|Re lambda| of the Jacobian at the steady state,
/// excluding the zero mode of trace conservation.
double relaxation_time(const ModelConfig& config);

struct ResponseOptions {
    double seed_n = 1e-6;       // photons per centre injected when starting dark
    int samples_per_window = 4000;
    double first_window = 2e-6;  // s; doubled until the 90% level is crossed
    double max_time = 1e-2;      // s
    IntegratorOptions integrator{};
};

struct ResponseResult {
    double t_63 = 0;  // s
    double t_90 = 0;  // s
    double n_start = 0;
    SteadyStateResult initial;
    SteadyStateResult final_state;
    TimeSeries trace;
};

/// Response of n to a sudden detuning change from delta_before to delta_after,
/// starting from the old steady state with n floored at options.seed_n.
ResponseResult step_response(const ModelConfig& config, double delta_before, double delta_after,
                             const ResponseOptions& options = {});

struct HarmonicOptions {
    int min_periods = 10;
    int samples_per_period = 64;
    int max_harmonic = 5;
    IntegratorOptions integrator{1e-10, 1e-20};
};

struct HarmonicResult {
    double n_o = 0;
    double n_S = 0;
    double phase = 0;       // rad; n(t) ~ n_o + n_S cos(omega t - phase)
    double distortion = 0;  // sum of harmonic 2..max power over first-harmonic power
    int periods = 0;
    double transient_time = 0;  // s, discarded before demodulation
    double relaxation_time = 0;  // s
};

/// Drives the field as B_o + B_S cos(omega t) and demodulates n(t) over an
/// integer number of periods after discarding the transient.
HarmonicResult ac_response(const ModelConfig& config, double bias_field, double amplitude, double angular_frequency,
                           const HarmonicOptions& options = {});

/// CSV with header t,rho11,...,rho77,rho14_re,rho14_im,n,P_out_W (weighted averages).
void write_time_series_csv(std::ostream& out, const TimeSeries& series);

}  // namespace ltm
