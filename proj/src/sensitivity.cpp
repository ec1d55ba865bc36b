#include "ltm/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ltm/errors.hpp"

namespace ltm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double shot_noise_factor(const ModelConfig& config, double n, double i_factor = 1.0) {
    const auto d = derive_constants(config);
    return std::sqrt(n * i_factor / (d.n_atoms * config.geometry.kappa));
}

void finish(SensitivityResult& r) {
    if (r.infinite || r.dn_dB == 0.0) {
        r.infinite = true;
        r.eta = kInf;
    } else {
        r.eta = r.shot_factor / std::abs(r.dn_dB);
    }
}

// True when `candidate` beats `best`; near-ties go to the larger field.
bool better(double f, double b, double best_f, double best_b) {
    if (!std::isfinite(f)) return false;
    if (!std::isfinite(best_f)) return true;
    const double tie = 1e-12 * std::abs(best_f);
    if (f < best_f - tie) return true;
    return std::abs(f - best_f) <= tie && b > best_b;
}

}  // namespace

std::string_view method_name(SensitivityMethod m) {
    switch (m) {
    case SensitivityMethod::dc_finite_difference: return "dc_finite_difference";
    case SensitivityMethod::ac_timedomain: return "ac_timedomain";
    case SensitivityMethod::ac_quasistatic: return "ac_quasistatic";
    }
    return "unknown";
}

double SensitivityResult::recomputed_eta() const {
    if (infinite) return kInf;
    return shot_factor / std::abs(dn_dB);
}

SteadyStateResult steady_state_at_field(const ModelConfig& config, double field, const SolverOptions& options) {
    ModelConfig c = config;
    c.drive.delta = b_field_to_detuning(field, config.constants);
    return solve_steady_state(c, options);
}

SensitivityResult dc_sensitivity(const ModelConfig& config, double field, const DifferenceOptions& options) {
    const auto centre = steady_state_at_field(config, field, options.solver);
    if (centre.branch != Branch::above_threshold)
        throw NoOutput("dc_sensitivity: below threshold at B = " + std::to_string(field) + " T");

    SensitivityResult r;
    r.field = field;
    r.n = centre.n;
    r.method = SensitivityMethod::dc_finite_difference;
    r.shot_factor = shot_noise_factor(config, centre.n);

    // Central difference; nullopt when a stencil point changes branch.
    auto difference = [&](double h) -> std::optional<double> {
        const auto up = steady_state_at_field(config, field + h, options.solver);
        const auto down = steady_state_at_field(config, field - h, options.solver);
        if (up.branch != Branch::above_threshold || down.branch != Branch::above_threshold) return std::nullopt;
        return (up.n - down.n) / (2.0 * h);
    };
    auto noise_floor = [&](double h) { return options.noise_multiple * options.solver.n_rel_tol * centre.n / h; };

    double h = std::max(1e-3 * std::abs(field), options.min_step);
    std::optional<double> coarse = difference(h);
    for (int i = 0; i < options.max_halvings; ++i) {
        const std::optional<double> fine = difference(0.5 * h);
        if (coarse && fine) {
            const double floor = noise_floor(0.5 * h);
            if (std::abs(*coarse) < floor && std::abs(*fine) < floor) {
                r.step = h;
                r.dn_dB = *coarse;
                r.infinite = true;
                finish(r);
                return r;
            }
            const double err = std::abs(*coarse - *fine) / std::abs(*fine);
            if (err < options.rel_error) {
                r.step = h;
                r.dn_dB = *coarse;
                r.richardson_error = err;
                finish(r);
                return r;
            }
        }
        h *= 0.5;
        coarse = fine;
    }
    throw NoConvergence("dc_sensitivity: finite-difference slope did not settle", h, 2.0 * h);
}

std::vector<std::optional<SensitivityResult>> dc_sensitivity_curve(const ModelConfig& config,
                                                                   const std::vector<double>& grid,
                                                                   const DifferenceOptions& options) {
    if (grid.empty()) throw DomainError("dc_sensitivity_curve: empty grid");
    std::vector<std::optional<SensitivityResult>> out;
    out.reserve(grid.size());
    for (double b : grid) {
        try {
            out.emplace_back(dc_sensitivity(config, b, options));
        } catch (const NoOutput&) {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2) throw DomainError("linear_grid: need at least two points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    g.back() = hi;
    return g;
}

SensitivityResult minimize_dc_sensitivity(const ModelConfig& config, double lo, double hi,
                                          const MinimumOptions& options) {
    if (!(hi > lo)) throw DomainError("minimize_dc_sensitivity: empty field window");
    const double floor = options.field_floor_fraction * std::max(std::abs(lo), std::abs(hi));

    std::optional<SensitivityResult> best;
    auto eval = [&](double b) {
        if (std::abs(b) < floor) return kInf;
        try {
            const auto r = dc_sensitivity(config, b, options.difference);
            if (r.infinite) return kInf;
            if (!best || better(r.eta, b, best->eta, best->field)) best = r;
            return r.eta;
        } catch (const NoOutput&) {
            return kInf;
        }
    };

    const auto grid = linear_grid(lo, hi, options.grid_points);
    std::size_t at = 0;
    double best_f = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double f = eval(grid[i]);
        if (better(f, grid[i], best_f, grid[at])) {
            best_f = f;
            at = i;
        }
    }
    if (!best) throw NoOutput("minimize_dc_sensitivity: no finite sensitivity in the field window");

    double a = grid[at == 0 ? 0 : at - 1];
    double c = grid[std::min(at + 1, grid.size() - 1)];
    if (grid[at] > 0.0) a = std::max(a, floor);
    if (grid[at] < 0.0) c = std::min(c, -floor);

    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = c - ratio * (c - a);
    double x2 = a + ratio * (c - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    while (c - a > options.tolerance_fraction * (hi - lo)) {
        if (f1 <= f2) {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - ratio * (c - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (c - a);
            f2 = eval(x2);
        }
    }
    return *best;
}

SensitivityResult ac_sensitivity(const ModelConfig& config, const AcSignalModel& signal, const AcOptions& options) {
    if (!(signal.i_factor > 1.0)) throw DomainError("ac_sensitivity: I factor must exceed 1");
    if (!(signal.amplitude > 0.0)) throw DomainError("ac_sensitivity: B_S must be > 0");

    SensitivityResult r;
    r.field = signal.bias_field;
    r.method = options.method;
    r.frequency = signal.angular_frequency;

    double n_o = 0.0;
    double n_s = 0.0;
    if (options.method == SensitivityMethod::ac_timedomain) {
        const auto h = ac_response(config, signal.bias_field, signal.amplitude, signal.angular_frequency,
                                   options.harmonic);
        n_o = h.n_o;
        n_s = h.n_S;
    } else if (options.method == SensitivityMethod::ac_quasistatic) {
        const int samples = options.quasistatic_samples;
        if (samples < 4) throw DomainError("ac_sensitivity: too few quasi-static samples");
        double a1 = 0.0, b1 = 0.0;
        bool lasing = false;
        for (int k = 0; k < samples; ++k) {
            const double phase = 2.0 * std::numbers::pi * k / samples;
            const auto ss = steady_state_at_field(config, signal.bias_field + signal.amplitude * std::cos(phase));
            lasing = lasing || ss.n > 0.0;
            n_o += ss.n;
            a1 += ss.n * std::cos(phase);
            b1 += ss.n * std::sin(phase);
        }
        if (!lasing) throw NoOutput("ac_sensitivity: laser below threshold over the whole signal cycle");
        n_o /= samples;
        n_s = std::hypot(a1, b1) * 2.0 / samples;
    } else {
        throw DomainError("ac_sensitivity: method must be ac_timedomain or ac_quasistatic");
    }
    r.n = n_o;
    r.dn_dB = n_s / signal.amplitude;
    r.shot_factor = shot_noise_factor(config, n_o, signal.i_factor);
    finish(r);
    return r;
}

double find_bias_point(const ModelConfig& config, double lo, double hi, const BiasOptions& options) {
    if (!(hi > lo)) throw DomainError("find_bias_point: empty field window");
    auto slope = [&](double b) {
        try {
            const auto r = dc_sensitivity(config, b, options.difference);
            return r.infinite ? 0.0 : std::abs(r.dn_dB);
        } catch (const NoOutput&) {
            return -1.0;
        }
    };
    // Maximise |dn/dB|: minimise its negative with the shared tie rule.
    auto scan = [&](const std::vector<double>& grid, std::size_t& at, double& best) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double s = slope(grid[i]);
            if (s < 0.0) continue;
            if (better(-s, grid[i], best, grid[at])) {
                best = -s;
                at = i;
            }
        }
    };

    auto grid = linear_grid(lo, hi, options.grid_points);
    std::size_t at = 0;
    double best = kInf;
    scan(grid, at, best);
    if (!std::isfinite(best)) throw NoOutput("find_bias_point: nowhere above threshold in the field window");

    double b_best = grid[at];
    double a = grid[at == 0 ? 0 : at - 1];
    double c = grid[std::min(at + 1, grid.size() - 1)];
    while (c - a > options.tolerance_fraction * (hi - lo)) {
        grid = linear_grid(a, c, options.refine_points);
        std::size_t k = 0;
        double local = kInf;
        scan(grid, k, local);
        if (!std::isfinite(local)) break;
        if (better(local, grid[k], best, b_best) || local == best) {
            best = local;
            b_best = grid[k];
        }
        a = grid[k == 0 ? 0 : k - 1];
        c = grid[std::min(k + 1, grid.size() - 1)];
    }
    return b_best;
}

std::string_view parameter_name(FreeParameter p) {
    switch (p) {
    case FreeParameter::kappa: return "kappa";
    case FreeParameter::lambda: return "lambda";
    case FreeParameter::omega: return "omega";
    }
    return "unknown";
}

double sensitivity_objective(const ModelConfig& config, const OptimizeOptions& options, double* best_field) {
    ModelConfig centre = config;
    centre.drive.delta = 0.0;
    if (net_gain(centre, 0.0) < -1e-9 * config.geometry.kappa) return kInf;
    try {
        const auto r = minimize_dc_sensitivity(config, 0.0, options.field_window, options.minimum);
        if (best_field) *best_field = r.field;
        return r.eta;
    } catch (const NoOutput&) {
        return kInf;
    }
}

namespace {

double get_free(const ModelConfig& c, FreeParameter p) {
    switch (p) {
    case FreeParameter::kappa: return c.geometry.kappa;
    case FreeParameter::lambda: return c.drive.lambda12;
    case FreeParameter::omega: return c.drive.omega;
    }
    return 0.0;
}

ModelConfig set_free(ModelConfig c, FreeParameter p, double v) {
    switch (p) {
    case FreeParameter::kappa: c.geometry.kappa = v; break;
    case FreeParameter::lambda: c = with_pump(c, v); break;
    case FreeParameter::omega: c.drive.omega = v; break;
    }
    return c;
}

}  // namespace

OptimizationOutcome optimize_sensitivity(const ModelConfig& config, const std::vector<ParameterBound>& free,
                                         const OptimizeOptions& options) {
    for (std::size_t i = 0; i < free.size(); ++i) {
        const auto& b = free[i];
        if (!(b.lo > 0.0) || !(b.hi >= b.lo) || !std::isfinite(b.hi))
            throw DomainError("optimize_sensitivity: bounds must be positive, finite and ordered");
        for (std::size_t j = 0; j < i; ++j)
            if (free[j].parameter == b.parameter) throw UsageError("optimize_sensitivity: parameter listed twice");
    }

    ModelConfig start = config;
    for (const auto& b : free) start = set_free(start, b.parameter, std::clamp(get_free(start, b.parameter), b.lo, b.hi));

    OptimizationOutcome out;
    // A start with a dark interval around zero field is infeasible; lift its
    // pump to the operating point when the pump is free and the point is in bounds.
    {
        ModelConfig centre = start;
        centre.drive.delta = 0.0;
        const auto pump = std::find_if(free.begin(), free.end(),
                                       [](const ParameterBound& b) { return b.parameter == FreeParameter::lambda; });
        if (pump != free.end() && net_gain(centre, 0.0) < -1e-9 * start.geometry.kappa) {
            const double op = find_operating_point(start, start.drive.omega);
            if (op >= pump->lo && op <= pump->hi) {
                start = with_pump(start, op);
                out.start_lifted = true;
            }
        }
    }

    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < free.size(); ++i)
        if (free[i].hi > free[i].lo) dims.push_back(i);

    auto config_at = [&](const std::vector<double>& x) {
        ModelConfig c = start;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const auto& b = free[dims[k]];
            c = set_free(c, b.parameter, std::clamp(std::pow(10.0, x[k]), b.lo, b.hi));
        }
        return c;
    };
    auto clamp_point = [&](std::vector<double>& x) {
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const auto& b = free[dims[k]];
            x[k] = std::clamp(x[k], std::log10(b.lo), std::log10(b.hi));
        }
    };

    struct Vertex {
        std::vector<double> x;
        double f;
        double field;
    };
    auto evaluate = [&](std::vector<double> x) {
        clamp_point(x);
        double field = 0.0;
        const double f = sensitivity_objective(config_at(x), options, &field);
        ++out.evaluations;
        return Vertex{x, f, field};
    };

    std::vector<double> x0;
    for (std::size_t i : dims) x0.push_back(std::log10(get_free(start, free[i].parameter)));
    std::vector<Vertex> simplex{evaluate(x0)};
    out.start_eta = simplex[0].f;

    for (std::size_t k = 0; k < dims.size(); ++k) {
        const auto& b = free[dims[k]];
        std::vector<double> x = x0;
        const double step = std::min(options.initial_log_step, 0.5 * (std::log10(b.hi) - std::log10(b.lo)));
        x[k] = x0[k] + step <= std::log10(b.hi) ? x0[k] + step : x0[k] - step;
        simplex.push_back(evaluate(x));
    }

    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    const std::size_t m = dims.size();
    while (m > 0) {
        std::stable_sort(simplex.begin(), simplex.end(), by_value);
        const Vertex& lo = simplex.front();
        const Vertex& hi = simplex.back();
        double size = 0.0;
        for (const auto& v : simplex)
            for (std::size_t k = 0; k < m; ++k) size = std::max(size, std::abs(v.x[k] - lo.x[k]));
        const bool flat = std::isfinite(hi.f) && hi.f - lo.f <= options.f_tolerance * std::abs(lo.f);
        if (flat && size <= options.x_tolerance) {
            out.converged = true;
            break;
        }
        if (size == 0.0 && std::isfinite(lo.f)) {
            out.converged = true;
            break;
        }
        if (out.evaluations >= options.max_evaluations) break;

        std::vector<double> centroid(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < m; ++k) centroid[k] += simplex[i].x[k] / static_cast<double>(m);
        auto along = [&](double t) {
            std::vector<double> x(m);
            for (std::size_t k = 0; k < m; ++k) x[k] = centroid[k] + t * (simplex.back().x[k] - centroid[k]);
            return x;
        };

        const Vertex reflected = evaluate(along(-1.0));
        if (reflected.f < simplex.front().f) {
            const Vertex expanded = evaluate(along(-2.0));
            simplex.back() = expanded.f < reflected.f ? expanded : reflected;
        } else if (reflected.f < simplex[m - 1].f) {
            simplex.back() = reflected;
        } else {
            const bool outside = reflected.f < simplex.back().f;
            const Vertex contracted = evaluate(along(outside ? -0.5 : 0.5));
            if (contracted.f < (outside ? reflected.f : simplex.back().f)) {
                simplex.back() = contracted;
            } else {
                for (std::size_t i = 1; i <= m; ++i) {
                    std::vector<double> x(m);
                    for (std::size_t k = 0; k < m; ++k)
                        x[k] = simplex[0].x[k] + 0.5 * (simplex[i].x[k] - simplex[0].x[k]);
                    simplex[i] = evaluate(x);
                }
            }
        }
    }
    if (m == 0) out.converged = true;

    const auto best = *std::min_element(simplex.begin(), simplex.end(), by_value);
    if (!std::isfinite(best.f)) throw NoOutput("optimize_sensitivity: objective is nowhere finite within the bounds");
    const ModelConfig result = config_at(best.x);
    out.kappa = result.geometry.kappa;
    out.lambda = result.drive.lambda12;
    out.omega = result.drive.omega;
    out.best_eta = best.f;
    out.best_field = best.field;
    return out;
}

L27Report l27_robustness(const ModelConfig& config, const std::vector<double>& ratios, const std::vector<double>& grid,
                         const L27Options& options) {
    for (double r : ratios)
        if (!(r >= 0.0)) throw DomainError("l27_robustness: ratios must be >= 0");

    auto configure = [&](double ratio) {
        ModelConfig c = config;
        c.rates.L27 = ratio * config.rates.L57;
        return options.retune ? at_operating_point(c) : c;
    };

    L27Report report;
    report.grid = grid;
    report.ratios = ratios;
    report.reference = dc_sensitivity_curve(configure(0.0), grid, options.difference);
    for (double ratio : ratios) {
        const ModelConfig c = configure(ratio);
        report.pump.push_back(c.drive.lambda12);
        report.curves.push_back(dc_sensitivity_curve(c, grid, options.difference));
        const auto& curve = report.curves.back();
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& a = curve[i];
            const auto& b = report.reference[i];
            if (!a && !b) continue;
            if (!a || !b || a->infinite != b->infinite) {
                worst = kInf;
                continue;
            }
            if (a->infinite) continue;
            worst = std::max(worst, std::abs(a->eta / b->eta - 1.0));
        }
        report.max_deviation.push_back(worst);
    }
    return report;
}

}  // namespace ltm
