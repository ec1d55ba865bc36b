#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ltm/dynamics.hpp"
#include "ltm/errors.hpp"
#include "ltm/sensitivity.hpp"

using namespace ltm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double max_abs(const StateVector& s) {
    double m = std::abs(s.n);
    for (const auto& e : s.ensembles)
        for (double x : e.to_array()) m = std::max(m, std::abs(x));
    return m;
}

ModelConfig hs_operating() { return at_operating_point(preset(Preset::high_sensitivity)); }

}  // namespace

TEST_CASE("rhs vanishes at the algebraic steady state") {
    for (auto p : {Preset::baseline, Preset::high_sensitivity}) {
        auto c = preset(p);
        c.drive.delta = 60e6;
        const auto ss = solve_steady_state(c);
        REQUIRE(ss.n > 0.0);
        const auto d = rhs(StateVector::from_steady_state(ss), c, 0.0, DriveModulation::constant(c.drive.delta));
        CHECK(max_abs(d) <= 1e-8 * largest_rate(c));
        CHECK(std::abs(d.n) <= 1e-8 * c.geometry.kappa * ss.n);
    }
}

TEST_CASE("rhs conserves the trace and keeps n = 0 dark") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto c = preset(Preset::baseline);
    for (int k = 0; k < 20; ++k) {
        StateVector s;
        PopulationState p;
        auto a = p.to_array();
        double sum = 0;
        for (int i = 0; i < 7; ++i) sum += (a[i] = u(rng));
        for (int i = 0; i < 7; ++i) a[i] /= sum;
        a[7] = 0.1 * (u(rng) - 0.5);
        a[8] = 0.1 * (u(rng) - 0.5);
        s.ensembles = {PopulationState::from_array(a)};
        s.n = k % 2 ? 0.0 : u(rng);
        const auto d = rhs(s, c, 0.0, DriveModulation::constant(1e7 * (u(rng) - 0.5)));
        CHECK(std::abs(d.ensembles[0].trace()) <= 1e-12 * largest_rate(c));
        if (s.n == 0.0) CHECK(d.n == 0.0);
    }
}

TEST_CASE("integration stays at a fixed point") {
    auto c = preset(Preset::baseline);
    c.drive.delta = 100e6;
    const auto ss = solve_steady_state(c);
    IntegrationStats stats;
    const auto ts = integrate(c, StateVector::from_steady_state(ss), 20e-6, DriveModulation::constant(c.drive.delta), {},
                              &stats);
    CHECK(std::abs(ts.states.back().n - ss.n) <= 10 * 1e-8 * ss.n);
    CHECK(stats.max_trace_drift <= 1e-9);
    for (std::size_t i = 1; i < ts.t.size(); ++i) CHECK(ts.t[i] > ts.t[i - 1]);
}

TEST_CASE("below threshold the field decays") {
    auto base = preset(Preset::baseline);
    auto c = with_pump(base, 0.8 * find_operating_point(base, base.drive.omega));
    c.drive.delta = 0.0;
    auto s = StateVector::from_steady_state(solve_steady_state(c));
    s.n = 1e-3;
    const auto ts = integrate(c, s, 200e-6, DriveModulation::constant(0.0));
    CHECK(ts.states.back().n < 1e-3 * 1e-2);
}

TEST_CASE("ODE relaxation reaches the algebraic steady state on random configs") {
    // Components are compared relatively down to a floor of 1e-12 absolute;
    // smaller components (rho14 at large detuning, n far below threshold) are
    // compared absolutely at that floor.
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    IntegratorOptions tight{1e-10, 1e-20};
    int checked = 0;
    for (int k = 0; k < 24; ++k) {
        auto c = preset(k % 2 ? Preset::high_sensitivity : Preset::baseline);
        const double op = find_operating_point(c, c.drive.omega);
        c = with_pump(c, op * (1.0 + 2.0 * u(rng)));
        c.drive.omega *= 0.5 + u(rng);
        c.drive.delta = 150e6 * (2.0 * u(rng) - 1.0);
        if (k % 5 == 0) c.orientation.mode = OrientationMode::four_orientation;
        CAPTURE(k);

        auto start_cfg = c;
        start_cfg.drive.delta = c.drive.delta + 30e6;
        auto s = StateVector::from_steady_state(solve_steady_state(start_cfg));
        s.n = std::max(s.n, 1e-6);

        const auto target = solve_steady_state(c);
        const double t_end = 50.0 * relaxation_time(c);
        IntegrationStats stats;
        const auto end = integrate_sampled(c, s, {t_end}, DriveModulation::constant(c.drive.delta), tight, &stats)
                             .states.back();
        CHECK(stats.max_trace_drift <= 1e-9);
        const auto want = StateVector::from_steady_state(target);
        CHECK(std::abs(end.n - want.n) <= 1e-6 * std::max(want.n, 1e-12 / 1e-6));
        for (std::size_t e = 0; e < want.ensembles.size(); ++e) {
            const auto a = end.ensembles[e].to_array();
            const auto b = want.ensembles[e].to_array();
            for (int i = 0; i < 9; ++i) CHECK(std::abs(a[i] - b[i]) <= std::max(1e-6 * std::abs(b[i]), 1e-12));
        }
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("tightening tolerances converges the end state") {
    const auto c = at_operating_point(preset(Preset::baseline));
    auto s = StateVector::from_steady_state(solve_steady_state(c));
    s.n = 1e-6;
    const auto mod = DriveModulation::step(0.0, 100e6, 0.0);
    const std::vector<double> at{30e-6};
    const double ref = integrate_sampled(c, s, at, mod, {1e-12, 1e-22}).states.back().n;
    double prev = INFINITY;
    for (double tol : {1e-5, 1e-7, 1e-9}) {
        const double err = std::abs(integrate_sampled(c, s, at, mod, {tol, tol * 1e-6}).states.back().n - ref);
        CAPTURE(tol);
        CHECK(err <= prev);
        prev = err;
    }
    CHECK(prev <= 1e-6 * ref);
}

TEST_CASE("step response") {
    const auto c = at_operating_point(preset(Preset::baseline));
    const auto r = step_response(c, 0.0, 100e6);
    CHECK(r.t_63 > 0.0);
    CHECK(r.t_63 <= r.t_90);
    CHECK(r.n_start == 1e-6);
    CHECK(r.final_state.n > 0.0);
    CHECK_THROWS_AS(step_response(c, 5e6, 5e6), DegenerateStep);
    // both ends dark
    CHECK_THROWS_AS(step_response(with_pump(c, 0.8 * c.drive.lambda12), 0.0, 1e3), DegenerateStep);
    ResponseOptions bad;
    bad.seed_n = 0.0;
    CHECK_THROWS_AS(step_response(c, 0.0, 100e6, bad), DomainError);
}

TEST_CASE("modulation checks") {
    CHECK_THROWS_AS(DriveModulation::sinusoid(0, -1e-9, 1.0).check(), DomainError);
    CHECK_THROWS_AS(DriveModulation::sinusoid(0, 1e-9, 0.0).check(), DomainError);
    const PhysicalConstants k;
    const auto m = DriveModulation::sinusoid(164e-6, 1e-9, 2.0);
    CHECK(m.detuning(0.0, k) == doctest::Approx(b_field_to_detuning(164e-6 + 1e-9, k)));
    const auto s = DriveModulation::step(1.0, 2.0, 5.0);
    CHECK(s.detuning(4.9, k) == 1.0);
    CHECK(s.detuning(5.1, k) == 2.0);
}

TEST_CASE("a.c. response is linear in the signal amplitude") {
    const auto c = hs_operating();
    const double w = kTwoPi * 1e4;
    const auto a = ac_response(c, 164e-6, 1e-9, w);
    const auto b = ac_response(c, 164e-6, 2e-9, w);
    CHECK(b.n_S / a.n_S == doctest::Approx(2.0).epsilon(0.01));
    CHECK(a.n_o > 0.0);
    CHECK(a.distortion >= 0.0);
    CHECK(a.distortion < 1e-3);
    CHECK(a.periods >= 10);
}

TEST_CASE("low-frequency a.c. slope matches the d.c. slope") {
    const auto c = hs_operating();
    const auto a = ac_response(c, 164e-6, 1e-9, kTwoPi * 1e4);
    const auto d = dc_sensitivity(c, 164e-6);
    CHECK(a.n_S / 1e-9 == doctest::Approx(std::abs(d.dn_dB)).epsilon(0.02));
}

TEST_CASE("a.c. response rolls off well above 1/t_r") {
    const auto c = hs_operating();
    const auto low = ac_response(c, 164e-6, 1e-9, kTwoPi * 1e4);
    const auto high = ac_response(c, 164e-6, 1e-9, kTwoPi * 1e6);
    CHECK(kTwoPi * 1e6 * low.relaxation_time > 1.0);
    CHECK(high.n_S < 0.5 * low.n_S);
}

TEST_CASE("a.c. response needs output") {
    const auto c = preset(Preset::high_sensitivity);
    CHECK_THROWS_AS(ac_response(c, 0.0, 1e-9, kTwoPi * 1e4), NoOutput);
}

TEST_CASE("time series CSV") {
    auto c = preset(Preset::baseline);
    c.drive.delta = 100e6;
    const auto ts = integrate_sampled(c, StateVector::from_steady_state(solve_steady_state(c)), {0.0, 1e-6},
                                      DriveModulation::constant(100e6));
    std::ostringstream out;
    write_time_series_csv(out, ts);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,rho11,rho22,rho33,rho44,rho55,rho66,rho77,rho14_re,rho14_im,n,P_out_W");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
