// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ltm/dynamics.hpp"
#include "ltm/errors.hpp"
#include "ltm/model.hpp"
#include "ltm/sensitivity.hpp"
#include "ltm/steady_state.hpp"

using namespace ltm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFemto = 1e-15;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

bool within_factor(double v, double ref, double factor) { return v >= ref / factor && v <= ref * factor; }

ModelConfig hs_operating() { return at_operating_point(preset(Preset::high_sensitivity)); }

Outcome derived_constants() {
    const auto c = preset(Preset::baseline);
    const auto d = derive_constants(c);
    const double per_mhz = detuning_to_b_field(1e6, c.constants);
    const bool ok = rel(d.g_rate, 308e6) <= 0.02 && rel(d.quality_factor, 8.9e8) <= 0.01 &&
                    rel(d.n_atoms, 1e12) <= 0.02 && rel(per_mhz, 5.68e-6) <= 0.005;
    return {ok, fmt("G=%.4g rad/s (308e6 +-2%%), Q=%.4g (8.9e8 +-1%%), N_at=%.4g (1e12 +-2%%), B/1e6 rad/s=%.4g uT "
                    "(5.68 +-0.5%%)",
                    d.g_rate, d.quality_factor, d.n_atoms, per_mhz * 1e6)};
}

Outcome threshold_logic() {
    auto c = with_pump(preset(Preset::baseline), 1.06e6);
    c.drive.omega = 3.67e6;
    c.drive.delta = 0.0;
    const auto dark = solve_steady_state(c);
    c.drive.delta = 100e6;
    const auto lit = solve_steady_state(c);
    const double p_mw = output_power(lit.n, c) * 1e3;
    const double th0 = threshold_pump(c, 0.0);
    const double th100 = threshold_pump(c, 100e6);
    const bool a = dark.n == 0.0;
    const bool b = lit.n > 0.0 && p_mw >= 0.1 && p_mw <= 10.0;
    const bool order = th0 > th100;
    return {a && b && order,
            fmt("Lambda=1.06e6: n(Delta=0)=%.4g [%s, want 0]; P_out(Delta=100e6)=%.4g mW [%s, want 0.1-10]; "
                "Lambda_th(0)=%.6g > Lambda_th(100e6)=%.6g [%s]",
                dark.n, a ? "ok" : "bad", p_mw, b ? "ok" : "bad", th0, th100, order ? "ok" : "bad")};
}

Outcome operating_point() {
    const double op = find_operating_point(preset(Preset::baseline), 3.67e6);
    return {op >= 0.90e6 && op <= 1.22e6, fmt("Lambda* = %.6g rad/s, want [0.90e6, 1.22e6]", op)};
}

Outcome dc_minimum() {
    const auto c = hs_operating();
    const double window = 300e-6;
    const auto m = minimize_dc_sensitivity(c, -window, window);
    // smoothness: finite, slowly varying eta on a fine grid around the minimum
    const double floor = 1e-3 * window;
    double worst_ratio = 1.0;
    bool finite = true;
    double prev = NAN;
    for (double b : linear_grid(m.field - 10e-6, m.field + 10e-6, 41)) {
        if (std::abs(b) < floor) {
            prev = NAN;
            continue;
        }
        double eta = INFINITY;
        try {
            eta = dc_sensitivity(c, b).eta;
        } catch (const NoOutput&) {
        }
        if (!std::isfinite(eta)) finite = false;
        if (std::isfinite(prev) && std::isfinite(eta)) worst_ratio = std::max(worst_ratio, std::max(eta / prev, prev / eta));
        prev = eta;
    }
    const bool smooth = finite && worst_ratio <= 1.25;
    const bool near = within_factor(m.eta, 1.86 * kFemto, 2.0);
    return {near && smooth, fmt("min eta=%.4g fT/sqrt(Hz) at B=%.4g uT (1.86 within x2: %s); 0.5 uT-step ratio max "
                                "%.3f over +-10 uT, all finite: %s",
                                m.eta / kFemto, m.field * 1e6, near ? "ok" : "bad", worst_ratio,
                                finite ? "yes" : "no")};
}

Outcome ac_sensitivity_check() {
    const auto c = hs_operating();
    AcSignalModel s;
    s.bias_field = 164e-6;
    s.amplitude = 1e-9;
    s.angular_frequency = kTwoPi * 1e4;
    const auto low = ac_sensitivity(c, s);
    s.angular_frequency = kTwoPi * 1e6;
    const auto high = ac_sensitivity(c, s);
    const bool near = within_factor(low.eta, 3.97 * kFemto, 2.0);
    const bool degraded = high.eta > 2.0 * low.eta;
    return {near && degraded, fmt("eta_ac(10 kHz)=%.4g fT/sqrt(Hz) (3.97 within x2: %s); eta_ac(1 MHz)=%.4g "
                                  "(ratio %.2f, want > 2)",
                                  low.eta / kFemto, near ? "ok" : "bad", high.eta / kFemto, high.eta / low.eta)};
}

Outcome response_time() {
    const auto base = at_operating_point(preset(Preset::baseline));
    const auto r = step_response(base, 0.0, 100e6);
    // raised-rate configuration: faster cavity and drive
    auto fast = preset(Preset::baseline);
    fast.geometry.kappa = 30e6;
    fast.drive.omega = 36.7e6;
    fast = at_operating_point(fast);
    const auto f = step_response(fast, 0.0, 100e6);
    const bool near = std::abs(r.t_63 - 0.94e-6) <= 0.5 * 0.94e-6;
    const bool trend = f.t_63 < r.t_63 && std::abs(f.t_63 - 0.5e-6) < std::abs(r.t_63 - 0.5e-6);
    return {near && trend, fmt("baseline t63=%.4g us t90=%.4g us (0.94 +-50%%: %s); raised-rate t63=%.4g us "
                               "(toward 0.5 us: %s)",
                               r.t_63 * 1e6, r.t_90 * 1e6, near ? "ok" : "bad", f.t_63 * 1e6, trend ? "ok" : "bad")};
}

Outcome l27() {
    const auto c = hs_operating();
    const auto grid = linear_grid(-300e-6, 300e-6, 121);
    const auto r = l27_robustness(c, {0.1, 0.01}, grid);
    L27Options fixed;
    fixed.retune = false;
    const auto f = l27_robustness(c, {0.1, 0.01}, grid, fixed);
    const bool ok = r.max_deviation[0] < 0.10 && r.max_deviation[1] < 0.01;
    return {ok, fmt("retuned: ratio 0.1 max change %.3g%% (< 10%%), ratio 0.01 %.3g%% (< 1%%); fixed pump: %.3g%%, "
                    "%.3g%%",
                    r.max_deviation[0] * 100, r.max_deviation[1] * 100, f.max_deviation[0] * 100,
                    f.max_deviation[1] * 100)};
}

Outcome properties() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_drift = 0, worst_residual = 0, worst_ode = 0, worst_sym = 0, worst_rich = 0;

    // random configs: residual, symmetry, ODE relaxation, trace drift
    const IntegratorOptions tight{1e-10, 1e-20};
    for (int k = 0; k < 24; ++k) {
        auto c = preset(k % 2 ? Preset::high_sensitivity : Preset::baseline);
        const double op = find_operating_point(c, c.drive.omega);
        c = with_pump(c, op * (1.0 + 2.0 * u(rng)));
        c.drive.omega *= 0.5 + u(rng);
        c.drive.delta = 150e6 * (2.0 * u(rng) - 1.0);
        if (k % 5 == 0) c.orientation.mode = OrientationMode::four_orientation;

        const auto ss = solve_steady_state(c);
        worst_residual = std::max(worst_residual, ss.residual / largest_rate(c));

        auto m = c;
        m.drive.delta = -c.drive.delta;
        const auto ms = solve_steady_state(m);
        worst_sym = std::max(worst_sym, rel(ss.n, ms.n));
        // (x, y) -> (-x, y) on the field-tracking sub-ensemble; pinned ones are unchanged
        for (std::size_t e = 0; e < ss.ensembles.size(); ++e) {
            const auto a = ss.ensembles[e].populations.to_array();
            const auto b = ms.ensembles[e].populations.to_array();
            const double sx = ss.ensembles[e].sub.tracks_field ? -1.0 : 1.0;
            for (int i = 0; i < 7; ++i) worst_sym = std::max(worst_sym, rel(a[i], b[i]));
            worst_sym = std::max({worst_sym, rel(a[7], sx * b[7]), rel(a[8], b[8])});
        }

        auto start_cfg = c;
        start_cfg.drive.delta = c.drive.delta + 30e6;
        auto s = StateVector::from_steady_state(solve_steady_state(start_cfg));
        s.n = std::max(s.n, 1e-6);
        IntegrationStats stats;
        const auto end = integrate_sampled(c, s, {50.0 * relaxation_time(c)},
                                           DriveModulation::constant(c.drive.delta), tight, &stats)
                             .states.back();
        worst_drift = std::max(worst_drift, stats.max_trace_drift);
        const auto want = StateVector::from_steady_state(ss);
        // components below 1e-6 are held to 1e-12 absolute instead
        auto err = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-6); };
        worst_ode = std::max(worst_ode, err(end.n, want.n));
        for (std::size_t e = 0; e < want.ensembles.size(); ++e) {
            const auto x = end.ensembles[e].to_array();
            const auto y = want.ensembles[e].to_array();
            for (int i = 0; i < 9; ++i) worst_ode = std::max(worst_ode, err(x[i], y[i]));
        }
    }

    // step-response trajectory drift
    {
        IntegrationStats stats;
        const auto c = at_operating_point(preset(Preset::baseline));
        auto s = StateVector::from_steady_state(solve_steady_state(c));
        s.n = 1e-6;
        integrate(c, s, 60e-6, DriveModulation::step(0.0, 100e6, 0.0), {}, &stats);
        worst_drift = std::max(worst_drift, stats.max_trace_drift);
    }

    // a.c. linearity
    const auto hs = hs_operating();
    const auto a1 = ac_response(hs, 164e-6, 1e-9, kTwoPi * 1e4);
    const auto a2 = ac_response(hs, 164e-6, 2e-9, kTwoPi * 1e4);
    const double lin = std::abs(a2.n_S / a1.n_S / 2.0 - 1.0);

    // Richardson convergence on the d.c. curve
    for (double b : linear_grid(-300e-6, 300e-6, 25)) {
        if (std::abs(b) < 0.3e-6) continue;
        const auto r = dc_sensitivity(hs, b);
        if (!r.infinite) worst_rich = std::max(worst_rich, r.richardson_error);
    }

    const bool ok = worst_drift <= 1e-9 && worst_residual <= 1e-8 && worst_ode <= 1e-6 && worst_sym <= 1e-10 &&
                    lin <= 0.01 && worst_rich < 1e-3;
    return {ok, fmt("trace drift %.2g (<=1e-9); residual/max-rate %.2g (<=1e-8); ODE vs algebraic %.2g (<=1e-6, 24 "
                    "configs); sign symmetry %.2g (<=1e-10); a.c. linearity %.2g (<=1e-2); Richardson %.2g (<1e-3)",
                    worst_drift, worst_residual, worst_ode, worst_sym, lin, worst_rich)};
}

void info_literal_pump() {
    // literal quoted high-sensitivity pump, for reference; below the operating
    // point the minimum sits on the edge of the dark interval where n -> 0
    const auto c = preset(Preset::high_sensitivity);
    try {
        const auto m = minimize_dc_sensitivity(c, -300e-6, 300e-6);
        std::printf("INFO high_sensitivity at quoted Lambda=%.4g: min eta_dc=%.4g fT/sqrt(Hz) at B=%.4g uT, "
                    "operating point %.6g\n",
                    c.drive.lambda12, m.eta / kFemto, m.field * 1e6, find_operating_point(c, c.drive.omega));
    } catch (const Error& e) {
        std::printf("INFO high_sensitivity at quoted Lambda: %s\n", e.what());
    }
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"1 derived constants", derived_constants}, {"2 threshold logic", threshold_logic},
        {"3 operating point", operating_point},     {"4 d.c. sensitivity", dc_minimum},
        {"5 a.c. sensitivity", ac_sensitivity_check}, {"6 response time", response_time},
        {"7 L27 robustness", l27},                  {"8 property suite", properties},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    info_literal_pump();
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
