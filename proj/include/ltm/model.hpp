#pragma once

// Parameter set and derived constants of the NV- laser threshold magnetometer.
//
// Unit convention: every rate is an angular rate in rad/s. A rate quoted as
// "3 MHz" in the literature is stored as 3e6 rad/s. Under this convention
// hbar/(g_e mu_B) = 5.68 uT per 1e6 rad/s and Q = 2 pi nu23 / kappa = 8.9e8 for
// kappa = 3e6 rad/s, which is how the published cross-checks close.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltm {

/// Carbon atom number density of diamond, 1.76e23 cm^-3, in m^-3.
inline constexpr double kCarbonNumberDensity = 1.76e29;

struct PhysicalConstants {
    double hbar = 1.054571817e-34;  // J s
    double g_e = 2.0023;            // Lande factor
    double mu_B = 9.2740100783e-24;  // J/T
    double c = 299792458.0;         // m/s

    double planck_h() const;  // 2 pi hbar
};

/// Incoherent rates of the seven-level model (rad/s). Index pairs name the
/// transition: L57 is |5> -> |7>.
struct LevelRates {
    double L21 = 0;
    double L23 = 0;
    double L31 = 0;
    double L54 = 0;
    double L56 = 0;
    double L64 = 0;
    double L57 = 0;
    double L71 = 0;
    double L74 = 0;
    double L27 = 0;
    double gamma14 = 0;  // ground-state dephasing
};

struct CavityGeometry {
    double medium_volume = 0;      // m^3
    double cavity_volume = 0;      // m^3
    double nv_concentration = 0;   // atomic fraction (5.7 ppb -> 5.7e-9)
    double nv_fraction = 1;        // NV- / (NV- + NV0), in (0, 1]
    double vacuum_wavelength = 0;  // m
    double refractive_index = 0;
    double sideband_width = 0;     // Hz
    double kappa = 0;              // cavity loss, rad/s
};

struct DriveSettings {
    double omega = 0;     // Rabi rate, rad/s
    double delta = 0;     // RF detuning, rad/s
    double lambda12 = 0;  // green pump, spin 0 manifold, rad/s
    double lambda45 = 0;  // green pump, spin 1 manifold, rad/s
};

enum class OrientationMode { single_orientation, four_orientation };

/// How the four NV axes of a single crystal are represented. In four-orientation
/// mode the aligned sub-ensemble sees the live detuning and the remaining
/// sub-ensembles sit at a fixed large detuning; all of them feed the cavity.
struct OrientationModel {
    OrientationMode mode = OrientationMode::single_orientation;
    double aligned_fraction = 0.25;
    double off_axis_detuning = 1e9;  // rad/s
};

struct ModelConfig {
    PhysicalConstants constants;
    LevelRates rates;
    CavityGeometry geometry;
    DriveSettings drive;
    OrientationModel orientation;
    /// Replaces the computed stimulated transition rate G when set (rad/s).
    std::optional<double> g_rate_override;
};

struct DerivedQuantities {
    double n_atoms = 0;             // NV- centres in the medium
    double g_rate = 0;              // G = G23 = G56, rad/s
    double nu23 = 0;                // lasing transition frequency, Hz
    double photon_energy = 0;       // J
    double quality_factor = 0;      // 2 pi nu23 / kappa
    double field_per_detuning = 0;  // T per rad/s
};

/// One class of identically-behaving centres. `tracks_field` marks the
/// sub-ensemble whose detuning follows the external field.
struct SubEnsemble {
    double weight = 1;
    bool tracks_field = true;
};

enum class Preset { baseline, high_sensitivity };

/// Throws InvalidConfig on the first violated invariant.
void validate(const ModelConfig& config);

DerivedQuantities derive_constants(const ModelConfig& config);

double b_field_to_detuning(double field_tesla, const PhysicalConstants& constants);
double detuning_to_b_field(double detuning, const PhysicalConstants& constants);

ModelConfig preset(Preset which);
Preset preset_from_name(std::string_view name);
std::string_view preset_name(Preset which);

/// Red output power in W for `n` intracavity photons per centre.
double output_power(double n, const ModelConfig& config);

/// Sub-ensembles for the configured orientation model. Weights sum to one.
std::vector<SubEnsemble> sub_ensembles(const ModelConfig& config);

/// Detuning seen by a sub-ensemble when the aligned axis sees `aligned_delta`.
double sub_ensemble_detuning(const SubEnsemble& sub, const ModelConfig& config, double aligned_delta);

/// Largest rate appearing in the equations of motion (rad/s). Used to scale residuals.
double largest_rate(const ModelConfig& config);

/// Copy of `config` with both pump rates set to `lambda`.
ModelConfig with_pump(ModelConfig config, double lambda);

}  // namespace ltm
