#pragma once

// Shot-noise-limited field sensitivity.
//
//   eta_dc = |dB/dn| sqrt(n / (N_at kappa))
//   eta_ac = |dB_S/dn_S| sqrt(n_o I / (N_at kappa)),  I = 2.43
//
// All fields in tesla, eta in T/sqrt(Hz).

#include <optional>
#include <string_view>
#include <vector>

#include "ltm/dynamics.hpp"
#include "ltm/model.hpp"
#include "ltm/steady_state.hpp"

namespace ltm {

enum class SensitivityMethod { dc_finite_difference, ac_timedomain, ac_quasistatic };

std::string_view method_name(SensitivityMethod m);

struct SensitivityResult {
    double eta = 0;          // T/sqrt(Hz); +inf when `infinite`
    double field = 0;        // B (d.c.) or B_o (a.c.), tesla
    double n = 0;            // n or n_o
    double dn_dB = 0;        // 1/T; dn_S/dB_S for a.c.
    double shot_factor = 0;  // sqrt(n / (N_at kappa)) (times sqrt(I) for a.c.), sqrt(s)
    SensitivityMethod method = SensitivityMethod::dc_finite_difference;
    bool infinite = false;   // slope below the numerical floor
    double step = 0;         // finite-difference half-width h, tesla
    double richardson_error = 0;  // |D(h) - D(h/2)| / |D(h/2)|
    double frequency = 0;    // signal angular frequency for a.c., rad/s

    /// eta recomputed from the stored slope and shot factor.
    double recomputed_eta() const;
};

struct DifferenceOptions {
    double rel_error = 1e-3;      // Richardson acceptance
    double min_step = 1e-9;       // initial h = max(1e-3 |B|, min_step), tesla
    int max_halvings = 40;
    double noise_multiple = 100;  // slope floor = noise_multiple * n_rel_tol * n / h
    SolverOptions solver{};
};

/// Steady state with the aligned detuning set from field B.
SteadyStateResult steady_state_at_field(const ModelConfig& config, double field, const SolverOptions& options = {});

SensitivityResult dc_sensitivity(const ModelConfig& config, double field, const DifferenceOptions& options = {});

/// One entry per grid point; below-threshold points are std::nullopt.
std::vector<std::optional<SensitivityResult>> dc_sensitivity_curve(const ModelConfig& config,
                                                                   const std::vector<double>& grid,
                                                                   const DifferenceOptions& options = {});

std::vector<double> linear_grid(double lo, double hi, int points);

struct MinimumOptions {
    int grid_points = 61;
    double field_floor_fraction = 1e-3;  // |B| >= fraction * max(|lo|, |hi|)
    double tolerance_fraction = 1e-4;    // golden-section bracket width / window
    DifferenceOptions difference{};
};

/// Smallest finite eta_dc over [lo, hi]: grid pre-scan, then golden-section on
/// the best cell. Fields closer to zero than the floor are skipped. Throws
/// NoOutput when no point of the window has a finite eta.
SensitivityResult minimize_dc_sensitivity(const ModelConfig& config, double lo, double hi,
                                          const MinimumOptions& options = {});

struct AcSignalModel {
    double i_factor = 2.43;
    double bias_field = 0;         // B_o, tesla
    double amplitude = 1e-9;       // B_S, tesla
    double angular_frequency = 0;  // rad/s
};

struct AcOptions {
    SensitivityMethod method = SensitivityMethod::ac_timedomain;
    int quasistatic_samples = 64;
    HarmonicOptions harmonic{};
};

/// eta_ac from the time-domain response (ac_response) or from steady states
/// demodulated over one quasi-static field cycle.
SensitivityResult ac_sensitivity(const ModelConfig& config, const AcSignalModel& signal, const AcOptions& options = {});

struct BiasOptions {
    int grid_points = 61;
    int refine_points = 21;
    double tolerance_fraction = 1e-4;
    DifferenceOptions difference{};
};

/// Field in [lo, hi] maximising |dn/dB|. Ties go to positive B.
double find_bias_point(const ModelConfig& config, double lo, double hi, const BiasOptions& options = {});

enum class FreeParameter { kappa, lambda, omega };

std::string_view parameter_name(FreeParameter p);

struct ParameterBound {
    FreeParameter parameter;
    double lo;
    double hi;
};

struct OptimizeOptions {
    double field_window = 300e-6;  // eta minimised over B in (0, field_window]
    int max_evaluations = 200;
    double initial_log_step = 0.1;  // decades
    double f_tolerance = 1e-4;      // relative spread of simplex values
    double x_tolerance = 1e-4;      // decades
    MinimumOptions minimum{};
};

struct OptimizationOutcome {
    double kappa = 0;
    double lambda = 0;
    double omega = 0;
    double best_eta = 0;
    double best_field = 0;
    double start_eta = 0;
    int evaluations = 0;
    bool converged = false;
    bool start_lifted = false;  // start pump raised to the operating point
};

/// Objective of the optimiser: min over B in (0, window] of eta_dc. Configs
/// whose zero-field state is below threshold (a finite dark interval) are
/// infeasible and score +inf.
double sensitivity_objective(const ModelConfig& config, const OptimizeOptions& options, double* best_field = nullptr);

/// Nelder-Mead over log10 of the free parameters, clamped to the bounds.
OptimizationOutcome optimize_sensitivity(const ModelConfig& config, const std::vector<ParameterBound>& free,
                                         const OptimizeOptions& options = {});

struct L27Options {
    bool retune = true;  // move each config to its own operating point first
    DifferenceOptions difference{};
};

struct L27Report {
    std::vector<double> grid;
    std::vector<double> ratios;
    std::vector<std::vector<std::optional<SensitivityResult>>> curves;  // one per ratio
    std::vector<std::optional<SensitivityResult>> reference;             // ratio 0
    std::vector<double> max_deviation;  // max |eta/eta_ref - 1| per ratio
    std::vector<double> pump;           // pump rate used per ratio
};

L27Report l27_robustness(const ModelConfig& config, const std::vector<double>& ratios, const std::vector<double>& grid,
                         const L27Options& options = {});

}  // namespace ltm
