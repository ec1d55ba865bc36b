#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ltm/errors.hpp"
#include "ltm/sensitivity.hpp"

using namespace ltm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ModelConfig hs_operating() { return at_operating_point(preset(Preset::high_sensitivity)); }

// Plain central difference of n(B) on the solver, no adaptivity.
double oracle_slope(const ModelConfig& c, double b, double h) {
    return (steady_state_at_field(c, b + h).n - steady_state_at_field(c, b - h).n) / (2.0 * h);
}

}  // namespace

TEST_CASE("eta is reproducible from the stored intermediates") {
    const auto c = hs_operating();
    for (double b : {20e-6, 164e-6, -90e-6}) {
        const auto r = dc_sensitivity(c, b);
        REQUIRE_FALSE(r.infinite);
        CHECK(r.eta == r.recomputed_eta());
        CHECK(r.eta > 0.0);
        const auto d = derive_constants(c);
        CHECK(r.shot_factor == doctest::Approx(std::sqrt(r.n / (d.n_atoms * c.geometry.kappa))).epsilon(1e-14));
        CHECK(r.richardson_error < 1e-3);
        CHECK(r.dn_dB == doctest::Approx(oracle_slope(c, b, r.step)).epsilon(1e-3));
    }
}

TEST_CASE("eta is symmetric in B") {
    const auto c = hs_operating();
    for (double b : {5e-6, 80e-6, 250e-6}) {
        const auto p = dc_sensitivity(c, b);
        const auto m = dc_sensitivity(c, -b);
        CHECK(m.eta == doctest::Approx(p.eta).epsilon(1e-6));
        CHECK(m.dn_dB == doctest::Approx(-p.dn_dB).epsilon(1e-6));
    }
}

TEST_CASE("dark configurations have no d.c. output") {
    const auto c = preset(Preset::high_sensitivity);  // literal pump: dark near B = 0
    CHECK_THROWS_AS(dc_sensitivity(c, 0.0), NoOutput);
    const auto curve = dc_sensitivity_curve(c, {0.0, 200e-6});
    CHECK_FALSE(curve[0].has_value());
    CHECK(curve[1].has_value());
}

TEST_CASE("zero slope at B = 0 is flagged infinite") {
    auto c = preset(Preset::baseline);  // literal pump lases at B = 0 with a flat top
    const auto r = dc_sensitivity(c, 0.0);
    CHECK(r.infinite);
    CHECK(std::isinf(r.eta));
}

TEST_CASE("shot factor scales as 1/sqrt(N_at) at fixed G") {
    auto c = hs_operating();
    c.drive.delta = b_field_to_detuning(164e-6, c.constants);
    c.g_rate_override = derive_constants(c).g_rate;
    const auto a = dc_sensitivity(c, 164e-6);
    c.geometry.nv_concentration *= 4.0;
    const auto b = dc_sensitivity(c, 164e-6);
    CHECK(b.n == a.n);
    CHECK(b.dn_dB == a.dn_dB);
    CHECK(b.shot_factor == doctest::Approx(0.5 * a.shot_factor).epsilon(1e-14));
}

TEST_CASE("minimum over B lands on a finite, smooth dip") {
    const auto c = hs_operating();
    const auto m = minimize_dc_sensitivity(c, -300e-6, 300e-6);
    CHECK_FALSE(m.infinite);
    CHECK(std::abs(m.field) >= 1e-3 * 300e-6 * (1 - 1e-12));
    for (double b : linear_grid(-300e-6, 300e-6, 31)) {
        if (std::abs(b) < 1e-3 * 300e-6) continue;
        const auto r = dc_sensitivity(c, b);
        CHECK(r.eta >= m.eta * (1 - 1e-6));
    }
    CHECK_THROWS_AS(minimize_dc_sensitivity(preset(Preset::high_sensitivity), -1e-6, 1e-6), NoOutput);
}

TEST_CASE("bias point") {
    const auto c = hs_operating();
    const double b = find_bias_point(c, -300e-6, 300e-6);
    CHECK(b > 0.0);
    CHECK(b == doctest::Approx(164e-6).epsilon(0.2));
    CHECK_THROWS_AS(find_bias_point(preset(Preset::high_sensitivity), -1e-6, 1e-6), NoOutput);
}

TEST_CASE("quasi-static and time-domain a.c. sensitivities agree at low frequency") {
    const auto c = hs_operating();
    AcSignalModel s;
    s.bias_field = 164e-6;
    s.angular_frequency = kTwoPi * 1e4;
    AcOptions td;
    AcOptions qs;
    qs.method = SensitivityMethod::ac_quasistatic;
    const auto a = ac_sensitivity(c, s, td);
    const auto b = ac_sensitivity(c, s, qs);
    CHECK(a.eta == doctest::Approx(b.eta).epsilon(0.1));
    CHECK(a.eta == a.recomputed_eta());
    CHECK(b.eta == b.recomputed_eta());
    CHECK(a.method == SensitivityMethod::ac_timedomain);

    // d.c. limit of the quasi-static slope
    const auto d = dc_sensitivity(c, 164e-6);
    CHECK(std::abs(b.dn_dB) == doctest::Approx(std::abs(d.dn_dB)).epsilon(0.02));
    s.i_factor = 1.0;
    CHECK_THROWS_AS(ac_sensitivity(c, s, qs), DomainError);
}

TEST_CASE("optimizer with collapsed bounds returns the start") {
    const auto c = hs_operating();
    const double k = c.geometry.kappa;
    const double l = c.drive.lambda12;
    OptimizeOptions o;
    const auto out = optimize_sensitivity(c, {{FreeParameter::kappa, k, k}, {FreeParameter::lambda, l, l}}, o);
    CHECK(out.kappa == k);
    CHECK(out.lambda == l);
    CHECK(out.best_eta == out.start_eta);
    CHECK(out.best_eta == sensitivity_objective(c, o));
}

TEST_CASE("optimizer descends within one decade") {
    const auto c = hs_operating();
    std::vector<ParameterBound> free;
    for (auto [p, v] : {std::pair{FreeParameter::kappa, c.geometry.kappa}, std::pair{FreeParameter::lambda, c.drive.lambda12},
                        std::pair{FreeParameter::omega, c.drive.omega}})
        free.push_back({p, v / 10.0, v * 10.0});
    OptimizeOptions o;
    o.max_evaluations = 40;
    const auto out = optimize_sensitivity(c, free, o);
    CHECK(out.best_eta <= out.start_eta);
    CHECK(out.best_eta <= 2.0 * 1.86e-15);
    CHECK(out.evaluations <= o.max_evaluations + 5);
    CHECK_THROWS_AS(optimize_sensitivity(c, {{FreeParameter::kappa, -1.0, 1.0}}), DomainError);
}

TEST_CASE("infeasible configs score infinity") {
    auto c = preset(Preset::high_sensitivity);  // dark interval around B = 0
    CHECK(std::isinf(sensitivity_objective(c, {})));
}

TEST_CASE("L27 ratio 0 reproduces the reference exactly") {
    const auto c = hs_operating();
    const auto grid = linear_grid(20e-6, 300e-6, 5);
    const auto r = l27_robustness(c, {0.0, 0.01}, grid);
    REQUIRE(r.curves.size() == 2);
    CHECK(r.max_deviation[0] == 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        REQUIRE(r.curves[0][i].has_value() == r.reference[i].has_value());
        if (r.reference[i]) CHECK(r.curves[0][i]->eta == r.reference[i]->eta);
    }
    CHECK(r.max_deviation[1] < 0.1);
    CHECK_THROWS_AS(l27_robustness(c, {-0.1}, grid), DomainError);
}
