#include "ltm/rate_equations.hpp"

namespace ltm {

std::array<double, PopulationState::size> PopulationState::to_array() const {
    return {rho11, rho22, rho33, rho44, rho55, rho66, rho77, rho14_re, rho14_im};
}

PopulationState PopulationState::from_array(const std::array<double, size>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
}

LocalDrive local_drive(const DriveSettings& drive, double delta) {
    return {drive.omega, delta, drive.lambda12, drive.lambda45};
}

PopulationState population_derivative(const LevelRates& r, const LocalDrive& d, double g, double n,
                                      const PopulationState& p) {
    const double dephasing = r.gamma14 + 0.5 * d.lambda12 + 0.5 * d.lambda45;
    const double stim23 = g * (p.rho22 - p.rho33) * n;
    const double stim56 = g * (p.rho55 - p.rho66) * n;

    PopulationState dp;
    dp.rho11 = -2.0 * d.omega * p.rho14_im - d.lambda12 * p.rho11 + r.L21 * p.rho22 + r.L31 * p.rho33 +
               r.L71 * p.rho77;
    dp.rho22 = d.lambda12 * p.rho11 - (r.L21 + r.L23 + r.L27) * p.rho22 - stim23;
    dp.rho33 = r.L23 * p.rho22 - r.L31 * p.rho33 + stim23;
    dp.rho44 = 2.0 * d.omega * p.rho14_im - d.lambda45 * p.rho44 + r.L54 * p.rho55 + r.L64 * p.rho66 +
               r.L74 * p.rho77;
    dp.rho55 = d.lambda45 * p.rho44 - (r.L54 + r.L56 + r.L57) * p.rho55 - stim56;
    dp.rho66 = r.L56 * p.rho55 - r.L64 * p.rho66 + stim56;
    dp.rho77 = r.L57 * p.rho55 + r.L27 * p.rho22 - (r.L71 + r.L74) * p.rho77;

    // (i Delta - gamma)(x + i y) - i Omega (rho44 - rho11)
    dp.rho14_re = -d.delta * p.rho14_im - dephasing * p.rho14_re;
    dp.rho14_im = d.delta * p.rho14_re - dephasing * p.rho14_im - d.omega * (p.rho44 - p.rho11);
    return dp;
}

Matrix9 population_generator(const LevelRates& r, const LocalDrive& d, double g, double n) {
    enum { p11, p22, p33, p44, p55, p66, p77, x14, y14 };
    const double gn = g * n;
    const double dephasing = r.gamma14 + 0.5 * (d.lambda12 + d.lambda45);
    Matrix9 m = Matrix9::Zero();

    m(p11, p11) = -d.lambda12;
    m(p11, p22) = r.L21;
    m(p11, p33) = r.L31;
    m(p11, p77) = r.L71;
    m(p11, y14) = -2.0 * d.omega;

    m(p22, p11) = d.lambda12;
    m(p22, p22) = -(r.L21 + r.L23 + r.L27) - gn;
    m(p22, p33) = gn;

    m(p33, p22) = r.L23 + gn;
    m(p33, p33) = -r.L31 - gn;

    m(p44, p44) = -d.lambda45;
    m(p44, p55) = r.L54;
    m(p44, p66) = r.L64;
    m(p44, p77) = r.L74;
    m(p44, y14) = 2.0 * d.omega;

    m(p55, p44) = d.lambda45;
    m(p55, p55) = -(r.L54 + r.L56 + r.L57) - gn;
    m(p55, p66) = gn;

    m(p66, p55) = r.L56 + gn;
    m(p66, p66) = -r.L64 - gn;

    m(p77, p22) = r.L27;
    m(p77, p55) = r.L57;
    m(p77, p77) = -(r.L71 + r.L74);

    m(x14, x14) = -dephasing;
    m(x14, y14) = -d.delta;
    m(y14, x14) = d.delta;
    m(y14, y14) = -dephasing;
    m(y14, p11) = d.omega;
    m(y14, p44) = -d.omega;
    return m;
}

double stimulated_gain(double g, const PopulationState& p) { return g * (p.rho22 - p.rho33) + g * (p.rho55 - p.rho66); }

}  // namespace ltm
