#pragma once

// Stationary solution of the rate equations.
//
// At fixed photon number n the populations solve a 9x9 linear system (one
// redundant row replaced by the trace condition). The photon number itself is
// the root of the net gain G (rho22 - rho33) + G (rho55 - rho66) - kappa, which
// decreases monotonically with n as the inversion saturates.

#include <vector>

#include "ltm/model.hpp"
#include "ltm/rate_equations.hpp"

namespace ltm {

enum class Branch { below_threshold, above_threshold };

struct SolverOptions {
    double n_rel_tol = 1e-10;        // bisection width relative to n
    double gain_tol_factor = 1e-8;   // |net gain| <= factor * kappa at the root
    int max_bracket_doublings = 200;
    int max_bisections = 400;
    double pump_scan_min = 1e3;      // rad/s, first pump rate tried by threshold_pump
    double pump_scan_max = 1e10;     // rad/s, Lambda_max of the threshold search
};

struct EnsembleState {
    SubEnsemble sub;
    double delta = 0;  // detuning seen by this sub-ensemble, rad/s
    PopulationState populations;
};

struct SteadyStateResult {
    std::vector<EnsembleState> ensembles;
    PopulationState populations;  // weight-averaged over sub-ensembles
    double n = 0;                 // photons per centre
    double net_gain_at_n = 0;     // rad/s
    Branch branch = Branch::below_threshold;
    double residual = 0;          // max |d/dt| over all populations and n, evaluated on the equations of motion
};

/// Populations of the field-aligned sub-ensemble (the whole ensemble in
/// single-orientation mode) at fixed n and the configured detuning.
PopulationState populations_at_fixed_n(const ModelConfig& config, double n);

/// Populations of one sub-ensemble at an explicit detuning.
PopulationState populations_at_fixed_n(const ModelConfig& config, double n, double delta);

/// Every sub-ensemble at fixed n.
std::vector<EnsembleState> ensemble_populations(const ModelConfig& config, double n);

/// Net cavity gain at photon number n (rad/s). Negative means the field decays.
double net_gain(const ModelConfig& config, double n);

SteadyStateResult solve_steady_state(const ModelConfig& config, const SolverOptions& options = {});

/// Max-norm of every time derivative at the given photon number and populations.
double stationary_residual(const ModelConfig& config, double n, const std::vector<EnsembleState>& ensembles);

/// Smallest pump rate Lambda = Lambda12 = Lambda45 at which the net gain at n = 0
/// crosses zero for detuning `delta`. The returned value is the dark side of
/// the crossing: net_gain <= 0 there.
double threshold_pump(const ModelConfig& config, double delta, const SolverOptions& options = {});

/// Pump rate that puts the device exactly at threshold on RF resonance (Delta = 0)
/// with Rabi rate `omega`: dark at Delta = 0, lasing once the field detunes the drive.
double find_operating_point(const ModelConfig& config, double omega, const SolverOptions& options = {});

/// `config` with both pumps moved to its operating point at the configured Rabi rate.
ModelConfig at_operating_point(const ModelConfig& config, const SolverOptions& options = {});

}  // namespace ltm
