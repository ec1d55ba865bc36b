#pragma once

// Equations of motion of one NV- sub-ensemble coupled to the cavity field.
//
//   d rho11/dt = -2 Omega Im(rho14) - L12 rho11 + L21 rho22 + L31 rho33 + L71 rho77
//   d rho14/dt = (i Delta - Gamma14 - L12/2 - L45/2) rho14 - i Omega (rho44 - rho11)
//   d rho22/dt = L12 rho11 - (L21 + L23 + L27) rho22 - G (rho22 - rho33) n
//   d rho33/dt = L23 rho22 - L31 rho33 - G (rho33 - rho22) n
//   d rho44/dt = 2 Omega Im(rho14) - L45 rho44 + L54 rho55 + L64 rho66 + L74 rho77
//   d rho55/dt = L45 rho44 - (L54 + L56 + L57) rho55 - G (rho55 - rho66) n
//   d rho66/dt = L56 rho55 - L64 rho66 - G (rho66 - rho55) n
//   d rho77/dt = L57 rho55 + L27 rho22 - (L71 + L74) rho77
//   d n/dt     = sum_s w_s G [(rho22 - rho33) + (rho55 - rho66)]_s n - kappa n
//
// Here L12, L45 are the pump rates Lambda12, Lambda45. The |2> -> |7> rate L27
// is zero in both presets.

#include <array>

#include <Eigen/Core>

#include "ltm/model.hpp"

namespace ltm {

/// Level occupations and the ground-state coherence of one sub-ensemble.
struct PopulationState {
    double rho11 = 1;
    double rho22 = 0;
    double rho33 = 0;
    double rho44 = 0;
    double rho55 = 0;
    double rho66 = 0;
    double rho77 = 0;
    double rho14_re = 0;
    double rho14_im = 0;

    static constexpr std::size_t size = 9;

    double trace() const { return rho11 + rho22 + rho33 + rho44 + rho55 + rho66 + rho77; }
    std::array<double, size> to_array() const;
    static PopulationState from_array(const std::array<double, size>& a);
};

/// Per-sub-ensemble drive: the detuning differs between sub-ensembles.
struct LocalDrive {
    double omega = 0;
    double delta = 0;
    double lambda12 = 0;
    double lambda45 = 0;
};

LocalDrive local_drive(const DriveSettings& drive, double delta);

/// Time derivative of every component of `p` at photon number `n`.
PopulationState population_derivative(const LevelRates& rates, const LocalDrive& drive, double g_rate, double n,
                                      const PopulationState& p);

using Matrix9 = Eigen::Matrix<double, 9, 9>;

/// Linear generator of the population dynamics at fixed n: d/dt p = A p, with p
/// ordered as PopulationState::to_array(). Also the population block of the
/// Jacobian.
Matrix9 population_generator(const LevelRates& rates, const LocalDrive& drive, double g_rate, double n);

/// Stimulated gain of one sub-ensemble, G (rho22 - rho33) + G (rho55 - rho66), rad/s.
double stimulated_gain(double g_rate, const PopulationState& p);

}  // namespace ltm
