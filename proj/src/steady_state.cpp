#include "ltm/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ltm/errors.hpp"

namespace ltm {

namespace {

using Vector9 = Eigen::Matrix<double, 9, 1>;

PopulationState solve_fixed_n(const LevelRates& rates, const LocalDrive& drive, double g, double n) {
    Matrix9 a = population_generator(rates, drive, g, n);
    Vector9 b = Vector9::Zero();
    // The occupation rows sum to zero, so the rho11 row is redundant; replace it
    // by the trace condition.
    a.row(0).setZero();
    a.row(0).head<7>().setOnes();
    b(0) = 1.0;

    // Rates span six decades; equilibrate rows before factorising.
    for (int i = 0; i < 9; ++i) {
        const double scale = a.row(i).cwiseAbs().maxCoeff();
        if (scale == 0.0) throw DegenerateConfig("stationary system is singular (a state has no dynamics)");
        a.row(i) /= scale;
        b(i) /= scale;
    }
    Vector9 x;
    Eigen::FullPivLU<Matrix9> lu(a);
    if (lu.isInvertible()) {
        x = lu.solve(b);
    } else {
        // Several stationary states (e.g. no pump and no RF drive leaves |1> and
        // |4> both absorbing): take the minimum-norm one.
        x = Eigen::CompleteOrthogonalDecomposition<Matrix9>(a).solve(b);
        if ((a * x - b).lpNorm<Eigen::Infinity>() > 1e-12)
            throw DegenerateConfig("stationary system is singular and inconsistent");
    }

    std::array<double, 9> out{};
    for (int i = 0; i < 9; ++i) out[static_cast<std::size_t>(i)] = x(i);
    return PopulationState::from_array(out);
}

double ensemble_gain(const ModelConfig& config, double g, const std::vector<EnsembleState>& ensembles) {
    double gain = 0.0;
    for (const auto& e : ensembles) gain += e.sub.weight * stimulated_gain(g, e.populations);
    return gain - config.geometry.kappa;
}

PopulationState weighted_average(const std::vector<EnsembleState>& ensembles) {
    std::array<double, 9> acc{};
    for (const auto& e : ensembles) {
        const auto a = e.populations.to_array();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e.sub.weight * a[i];
    }
    return PopulationState::from_array(acc);
}

}  // namespace

PopulationState populations_at_fixed_n(const ModelConfig& config, double n, double delta) {
    if (!(n >= 0.0)) throw DomainError("populations_at_fixed_n: n must be >= 0");
    const auto g = derive_constants(config).g_rate;
    return solve_fixed_n(config.rates, local_drive(config.drive, delta), g, n);
}

PopulationState populations_at_fixed_n(const ModelConfig& config, double n) {
    return populations_at_fixed_n(config, n, config.drive.delta);
}

std::vector<EnsembleState> ensemble_populations(const ModelConfig& config, double n) {
    if (!(n >= 0.0)) throw DomainError("ensemble_populations: n must be >= 0");
    const auto g = derive_constants(config).g_rate;
    std::vector<EnsembleState> out;
    for (const auto& sub : sub_ensembles(config)) {
        const double delta = sub_ensemble_detuning(sub, config, config.drive.delta);
        out.push_back({sub, delta, solve_fixed_n(config.rates, local_drive(config.drive, delta), g, n)});
    }
    return out;
}

double net_gain(const ModelConfig& config, double n) {
    const auto g = derive_constants(config).g_rate;
    return ensemble_gain(config, g, ensemble_populations(config, n));
}

double stationary_residual(const ModelConfig& config, double n, const std::vector<EnsembleState>& ensembles) {
    const auto g = derive_constants(config).g_rate;
    double worst = 0.0;
    for (const auto& e : ensembles) {
        const auto dp = population_derivative(config.rates, local_drive(config.drive, e.delta), g, n, e.populations);
        for (double v : dp.to_array()) worst = std::max(worst, std::abs(v));
    }
    worst = std::max(worst, std::abs(n * ensemble_gain(config, g, ensembles)));
    return worst;
}

SteadyStateResult solve_steady_state(const ModelConfig& config, const SolverOptions& options) {
    validate(config);
    const double gain_tol = options.gain_tol_factor * config.geometry.kappa;

    SteadyStateResult result;
    const auto dark = ensemble_populations(config, 0.0);
    const double g = derive_constants(config).g_rate;
    const double gain0 = ensemble_gain(config, g, dark);

    if (gain0 <= 0.0) {
        result.ensembles = dark;
        result.n = 0.0;
        result.net_gain_at_n = gain0;
        result.branch = Branch::below_threshold;
    } else {
        auto gain_at = [&](double n) { return net_gain(config, n); };

        double lo = 0.0;
        double hi = 1e-8;
        int doublings = 0;
        while (gain_at(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (++doublings > options.max_bracket_doublings)
                throw NoConvergence("solve_steady_state: photon-number bracket expansion failed", lo, hi);
        }

        double mid = 0.5 * (lo + hi);
        double gmid = gain_at(mid);
        for (int it = 0;; ++it) {
            const bool narrow = (hi - lo) <= options.n_rel_tol * mid;
            if (narrow && std::abs(gmid) <= gain_tol) break;
            if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
                if (std::abs(gmid) <= gain_tol) break;
                throw NoConvergence("solve_steady_state: gain tolerance unreachable at machine precision", lo, hi);
            }
            if (it >= options.max_bisections)
                throw NoConvergence("solve_steady_state: bisection did not converge", lo, hi);
            (gmid > 0.0 ? lo : hi) = mid;
            mid = 0.5 * (lo + hi);
            gmid = gain_at(mid);
        }
        result.ensembles = ensemble_populations(config, mid);
        result.n = mid;
        result.net_gain_at_n = gmid;
        result.branch = Branch::above_threshold;
    }
    result.populations = weighted_average(result.ensembles);
    result.residual = stationary_residual(config, result.n, result.ensembles);
    return result;
}

double threshold_pump(const ModelConfig& config, double delta, const SolverOptions& options) {
    validate(config);
    ModelConfig probe = config;
    probe.drive.delta = delta;
    auto gain_at = [&](double lambda) { return net_gain(with_pump(probe, lambda), 0.0); };

    // Geometric scan for the first sign change, then bisection on that cell.
    const double step = std::sqrt(2.0);
    double lo = 0.0;
    double glo = gain_at(0.0);
    double hi = options.pump_scan_min;
    double ghi = gain_at(hi);
    while (ghi <= 0.0) {
        if (hi >= options.pump_scan_max)
            throw NotLasable("no pump rate up to " + std::to_string(options.pump_scan_max) +
                             " rad/s reaches threshold at this detuning");
        lo = hi;
        glo = ghi;
        hi = std::min(hi * step, options.pump_scan_max);
        ghi = gain_at(hi);
    }

    for (int it = 0; it < options.max_bisections && (hi - lo) > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gmid = gain_at(mid);
        if (gmid > 0.0) {
            hi = mid;
            ghi = gmid;
        } else {
            lo = mid;
            glo = gmid;
        }
    }

    // Gain must rise with pump across the final bracket.
    const double quarter = gain_at(lo + 0.25 * (hi - lo));
    const double three_quarter = gain_at(lo + 0.75 * (hi - lo));
    const double slack = 1e-12 * config.geometry.kappa;
    if (quarter + slack < glo || three_quarter + slack < quarter || ghi + slack < three_quarter)
        throw NoConvergence("threshold_pump: net gain not monotone in pump rate on the threshold bracket", lo, hi);
    return lo;
}

double find_operating_point(const ModelConfig& config, double omega, const SolverOptions& options) {
    ModelConfig probe = config;
    probe.drive.omega = omega;
    return threshold_pump(probe, 0.0, options);
}

ModelConfig at_operating_point(const ModelConfig& config, const SolverOptions& options) {
    return with_pump(config, find_operating_point(config, config.drive.omega, options));
}

}  // namespace ltm
