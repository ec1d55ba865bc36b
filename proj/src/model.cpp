#include "ltm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ltm/errors.hpp"

namespace ltm {

double PhysicalConstants::planck_h() const { return 2.0 * std::numbers::pi * hbar; }

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw InvalidConfig(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void validate(const ModelConfig& config) {
    const auto& k = config.constants;
    require(finite_pos(k.hbar) && finite_pos(k.g_e) && finite_pos(k.mu_B) && finite_pos(k.c),
            "physical constants must be positive");

    const auto& r = config.rates;
    for (double v : {r.L21, r.L23, r.L31, r.L54, r.L56, r.L64, r.L57, r.L71, r.L74, r.L27, r.gamma14})
        require(finite_nonneg(v), "level rates must be finite and >= 0");

    const auto& g = config.geometry;
    require(finite_pos(g.medium_volume), "medium_volume must be positive");
    require(finite_pos(g.cavity_volume), "cavity_volume must be positive");
    require(g.medium_volume <= g.cavity_volume, "medium_volume must not exceed cavity_volume");
    require(finite_pos(g.nv_concentration), "nv_concentration must be positive");
    require(finite_pos(g.nv_fraction) && g.nv_fraction <= 1.0, "nv_fraction must lie in (0, 1]");
    require(finite_pos(g.vacuum_wavelength), "vacuum_wavelength must be positive");
    require(finite_pos(g.refractive_index), "refractive_index must be positive");
    require(finite_pos(g.sideband_width), "sideband_width must be positive");
    require(finite_pos(g.kappa), "kappa must be positive");

    const auto& d = config.drive;
    require(finite_nonneg(d.omega), "omega must be >= 0");
    require(std::isfinite(d.delta), "delta must be finite");
    require(finite_nonneg(d.lambda12) && finite_nonneg(d.lambda45), "pump rates must be >= 0");

    const auto& o = config.orientation;
    require(std::isfinite(o.aligned_fraction) && o.aligned_fraction > 0.0 && o.aligned_fraction <= 1.0,
            "aligned_fraction must lie in (0, 1]");
    require(std::isfinite(o.off_axis_detuning), "off_axis_detuning must be finite");

    if (config.g_rate_override) require(finite_pos(*config.g_rate_override), "g_rate override must be positive");
}

DerivedQuantities derive_constants(const ModelConfig& config) {
    validate(config);
    const auto& g = config.geometry;
    const auto& k = config.constants;
    constexpr double pi = std::numbers::pi;

    DerivedQuantities out;
    out.n_atoms = g.nv_concentration * kCarbonNumberDensity * g.medium_volume * g.nv_fraction;
    out.nu23 = k.c / g.vacuum_wavelength;
    const double lambda = g.vacuum_wavelength / g.refractive_index;
    out.g_rate = config.g_rate_override.value_or(3.0 * out.nu23 * config.rates.L23 * lambda * lambda * lambda *
                                                 out.n_atoms / (4.0 * pi * pi * g.sideband_width * g.cavity_volume));
    out.photon_energy = k.planck_h() * out.nu23;
    out.quality_factor = 2.0 * pi * out.nu23 / g.kappa;
    out.field_per_detuning = k.hbar / (k.g_e * k.mu_B);
    return out;
}

double b_field_to_detuning(double field_tesla, const PhysicalConstants& constants) {
    return field_tesla * constants.g_e * constants.mu_B / constants.hbar;
}

double detuning_to_b_field(double detuning, const PhysicalConstants& constants) {
    return detuning * constants.hbar / (constants.g_e * constants.mu_B);
}

ModelConfig preset(Preset which) {
    ModelConfig c;
    auto& r = c.rates;
    r.L23 = r.L56 = 18e6;
    r.L21 = r.L54 = 68.2e6;
    r.L31 = r.L64 = 1e12;
    r.L57 = 1.0 / 24.9e-9;
    r.L74 = 1.0 / 462e-9;
    r.L71 = r.L74 / 2.0;
    r.L27 = 0.0;
    r.gamma14 = 1e6;

    auto& g = c.geometry;
    g.medium_volume = 1e-9;
    g.cavity_volume = 2e-9;
    g.nv_concentration = 5.7e-9;
    g.nv_fraction = 1.0;
    g.vacuum_wavelength = 709e-9;
    g.refractive_index = 2.4;
    g.sideband_width = 24e12;
    g.kappa = 3e6;

    c.drive.omega = 3.67e6;
    c.drive.delta = 0.0;
    c.drive.lambda12 = c.drive.lambda45 = 1.06e6;

    if (which == Preset::high_sensitivity) {
        g.nv_concentration = 16e-6;
        r.gamma14 = 1.0 / 0.181e-6;
        g.kappa = 63.1e9;
        c.drive.lambda12 = c.drive.lambda45 = 10.4e6;
        c.drive.omega = 6.14e6;
    }
    return c;
}

Preset preset_from_name(std::string_view name) {
    if (name == "baseline") return Preset::baseline;
    if (name == "high_sensitivity") return Preset::high_sensitivity;
    throw UsageError("unknown preset '" + std::string(name) + "' (expected baseline or high_sensitivity)");
}

std::string_view preset_name(Preset which) {
    return which == Preset::baseline ? "baseline" : "high_sensitivity";
}

double output_power(double n, const ModelConfig& config) {
    if (!(n >= 0.0)) throw DomainError("output_power: photon number must be >= 0");
    const auto d = derive_constants(config);
    return n * d.n_atoms * config.geometry.kappa * d.photon_energy;
}

std::vector<SubEnsemble> sub_ensembles(const ModelConfig& config) {
    if (config.orientation.mode == OrientationMode::single_orientation) return {SubEnsemble{1.0, true}};
    const double f = config.orientation.aligned_fraction;
    if (f >= 1.0) return {SubEnsemble{1.0, true}};
    return {SubEnsemble{f, true}, SubEnsemble{1.0 - f, false}};
}

double sub_ensemble_detuning(const SubEnsemble& sub, const ModelConfig& config, double aligned_delta) {
    return sub.tracks_field ? aligned_delta : config.orientation.off_axis_detuning;
}

double largest_rate(const ModelConfig& config) {
    const auto& r = config.rates;
    const auto& d = config.drive;
    const double g = derive_constants(config).g_rate;
    return std::max({r.L21, r.L23, r.L31, r.L54, r.L56, r.L64, r.L57, r.L71, r.L74, r.L27, r.gamma14,
                     config.geometry.kappa, d.omega, std::abs(d.delta), d.lambda12, d.lambda45, g});
}

ModelConfig with_pump(ModelConfig config, double lambda) {
    config.drive.lambda12 = config.drive.lambda45 = lambda;
    return config;
}

}  // namespace ltm
