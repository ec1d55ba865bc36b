#include "ltm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <boost/math/constants/constants.hpp>
#include <boost/numeric/odeint/stepper/rosenbrock4.hpp>
#include <boost/numeric/odeint/stepper/rosenbrock4_controller.hpp>

#include "ltm/config_io.hpp"
#include "ltm/errors.hpp"

namespace ltm {

namespace odeint = boost::numeric::odeint;
using UVector = boost::numeric::ublas::vector<double>;
using UMatrix = boost::numeric::ublas::matrix<double>;

PopulationState StateVector::average(const ModelConfig& config) const {
    const auto subs = sub_ensembles(config);
    std::array<double, PopulationState::size> acc{};
    for (std::size_t s = 0; s < ensembles.size() && s < subs.size(); ++s) {
        const auto a = ensembles[s].to_array();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += subs[s].weight * a[i];
    }
    return PopulationState::from_array(acc);
}

StateVector StateVector::from_steady_state(const SteadyStateResult& ss) {
    StateVector v;
    for (const auto& e : ss.ensembles) v.ensembles.push_back(e.populations);
    v.n = ss.n;
    return v;
}

DriveModulation DriveModulation::constant(double delta) {
    DriveModulation m;
    m.kind = ModulationKind::constant;
    m.delta_before = delta;
    m.delta_after = delta;
    return m;
}

DriveModulation DriveModulation::step(double before, double after, double at) {
    DriveModulation m;
    m.kind = ModulationKind::step;
    m.delta_before = before;
    m.delta_after = after;
    m.step_time = at;
    return m;
}

DriveModulation DriveModulation::sinusoid(double bias, double amplitude, double omega) {
    DriveModulation m;
    m.kind = ModulationKind::sinusoid;
    m.bias_field = bias;
    m.amplitude = amplitude;
    m.angular_frequency = omega;
    return m;
}

void DriveModulation::check() const {
    if (kind == ModulationKind::sinusoid) {
        if (!(amplitude >= 0.0)) throw DomainError("sinusoidal modulation needs B_S >= 0");
        if (!(angular_frequency > 0.0)) throw DomainError("sinusoidal modulation needs omega > 0");
    }
    if (kind == ModulationKind::step && !(step_time >= 0.0)) throw DomainError("step time must be >= 0");
}

double DriveModulation::detuning(double t, const PhysicalConstants& constants) const {
    switch (kind) {
    case ModulationKind::constant: return delta_before;
    case ModulationKind::step: return t < step_time ? delta_before : delta_after;
    case ModulationKind::sinusoid:
        return b_field_to_detuning(bias_field + amplitude * std::cos(angular_frequency * t), constants);
    }
    return 0.0;
}

double DriveModulation::detuning_rate(double t, const PhysicalConstants& constants) const {
    if (kind != ModulationKind::sinusoid) return 0.0;
    return b_field_to_detuning(-amplitude * angular_frequency * std::sin(angular_frequency * t), constants);
}

namespace {

constexpr std::size_t kBlock = PopulationState::size;

struct Problem {
    const ModelConfig& config;
    const DriveModulation& modulation;
    std::vector<SubEnsemble> subs;
    double g;

    Problem(const ModelConfig& c, const DriveModulation& m)
        : config(c), modulation(m), subs(sub_ensembles(c)), g(derive_constants(c).g_rate) {}

    std::size_t size() const { return kBlock * subs.size() + 1; }

    LocalDrive drive_of(std::size_t s, double t) const {
        const double aligned = modulation.detuning(t, config.constants);
        return local_drive(config.drive, sub_ensemble_detuning(subs[s], config, aligned));
    }

    PopulationState block(const UVector& x, std::size_t s) const {
        std::array<double, kBlock> a{};
        for (std::size_t i = 0; i < kBlock; ++i) a[i] = x[s * kBlock + i];
        return PopulationState::from_array(a);
    }

    void derivative(const UVector& x, UVector& dxdt, double t) const {
        const double n = x[size() - 1];
        double gain = 0.0;
        for (std::size_t s = 0; s < subs.size(); ++s) {
            const auto p = block(x, s);
            const auto dp = population_derivative(config.rates, drive_of(s, t), g, n, p).to_array();
            for (std::size_t i = 0; i < kBlock; ++i) dxdt[s * kBlock + i] = dp[i];
            gain += subs[s].weight * stimulated_gain(g, p);
        }
        dxdt[size() - 1] = n * (gain - config.geometry.kappa);
    }

    void jacobian(const UVector& x, UMatrix& jac, double t, UVector& dfdt) const {
        const std::size_t nn = size() - 1;
        const double n = x[nn];
        jac.clear();
        dfdt.clear();
        double gain = 0.0;
        const double rate = modulation.detuning_rate(t, config.constants);
        for (std::size_t s = 0; s < subs.size(); ++s) {
            const auto p = block(x, s);
            const Matrix9 a = population_generator(config.rates, drive_of(s, t), g, n);
            const std::size_t o = s * kBlock;
            for (std::size_t i = 0; i < kBlock; ++i)
                for (std::size_t j = 0; j < kBlock; ++j) jac(o + i, o + j) = a(static_cast<int>(i), static_cast<int>(j));

            const double d23 = p.rho22 - p.rho33;
            const double d56 = p.rho55 - p.rho66;
            jac(o + 1, nn) = -g * d23;
            jac(o + 2, nn) = g * d23;
            jac(o + 4, nn) = -g * d56;
            jac(o + 5, nn) = g * d56;

            const double wgn = subs[s].weight * g * n;
            jac(nn, o + 1) = wgn;
            jac(nn, o + 2) = -wgn;
            jac(nn, o + 4) = wgn;
            jac(nn, o + 5) = -wgn;
            gain += subs[s].weight * stimulated_gain(g, p);

            if (subs[s].tracks_field) {
                dfdt[o + 7] = -p.rho14_im * rate;
                dfdt[o + 8] = p.rho14_re * rate;
            }
        }
        jac(nn, nn) = gain - config.geometry.kappa;
    }
};

UVector pack(const StateVector& v, std::size_t subs) {
    if (v.ensembles.size() != subs)
        throw DomainError("state has " + std::to_string(v.ensembles.size()) + " sub-ensembles, config has " +
                          std::to_string(subs));
    if (!(v.n >= 0.0)) throw DomainError("initial photon number must be >= 0");
    UVector x(kBlock * subs + 1);
    for (std::size_t s = 0; s < subs; ++s) {
        const auto a = v.ensembles[s].to_array();
        for (std::size_t i = 0; i < kBlock; ++i) x[s * kBlock + i] = a[i];
    }
    x[kBlock * subs] = v.n;
    return x;
}

StateVector unpack(const UVector& x, std::size_t subs) {
    StateVector v;
    for (std::size_t s = 0; s < subs; ++s) {
        std::array<double, kBlock> a{};
        for (std::size_t i = 0; i < kBlock; ++i) a[i] = x[s * kBlock + i];
        v.ensembles.push_back(PopulationState::from_array(a));
    }
    v.n = x[kBlock * subs];
    return v;
}

class Engine {
public:
    Engine(const Problem& problem, const IntegratorOptions& options, IntegrationStats& stats)
        : problem_(problem), options_(options), stats_(stats), controller_(options.abs_tol, options.rel_tol) {
        if (!(options.rel_tol > 0.0) || !(options.abs_tol > 0.0))
            throw DomainError("integrator tolerances must be positive");
        dt_ = options.initial_step;
    }

    // Advances x from t to exactly `target`, calling on_step after every accepted step.
    void advance(UVector& x, double& t, double target, const std::function<void(double, const UVector&)>& on_step) {
        auto sys = std::make_pair([this](const UVector& y, UVector& dy, double tt) { problem_.derivative(y, dy, tt); },
                                  [this](const UVector& y, UMatrix& j, double tt, UVector& dfdt) {
                                      problem_.jacobian(y, j, tt, dfdt);
                                  });
        if (trace0_.empty()) trace0_ = traces(x);
        while (t < target) {
            const double remaining = target - t;
            const bool clipped = dt_ >= remaining;
            double h = clipped ? remaining : dt_;
            const auto res = controller_.try_step(sys, x, t, h);
            if (res == odeint::fail) {
                ++stats_.rejected;
                dt_ = h;
                if (dt_ < options_.min_step || t + dt_ == t)
                    throw StiffnessFailure("step size underflow (h=" + std::to_string(dt_) + ", n=" +
                                               std::to_string(x[x.size() - 1]) + ")",
                                           t);
                continue;
            }
            ++stats_.accepted;
            if (stats_.accepted + stats_.rejected > options_.max_steps)
                throw StiffnessFailure("step budget exhausted", t);
            if (clipped) {
                t = target;
                dt_ = std::max(h, dt_);
            } else {
                dt_ = h;
            }
            sanitize(x, t);
            if (on_step) on_step(t, x);
        }
    }

private:
    std::vector<double> traces(const UVector& x) const {
        std::vector<double> out;
        for (std::size_t s = 0; s + 1 < x.size(); s += kBlock) {
            double tr = 0.0;
            for (std::size_t i = 0; i < 7; ++i) tr += x[s + i];
            out.push_back(tr);
        }
        return out;
    }

    void sanitize(UVector& x, double t) {
        const double tol = options_.abs_tol;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!std::isfinite(x[i])) throw StiffnessFailure("non-finite state component", t);

        double& n = x[x.size() - 1];
        if (n < 0.0) {
            if (n < -tol) throw StiffnessFailure("photon number undershoot " + std::to_string(n) + " beyond abs_tol", t);
            n = 0.0;
            ++stats_.clamped;
        }
        for (std::size_t s = 0; s + 1 < x.size(); s += kBlock) {
            for (std::size_t i = 0; i < 7; ++i) {
                double& v = x[s + i];
                if (v < -tol || v > 1.0 + tol)
                    throw StiffnessFailure("occupation " + std::to_string(v) + " left [0, 1]", t);
                if (v < 0.0 || v > 1.0) {
                    v = std::clamp(v, 0.0, 1.0);
                    ++stats_.clamped;
                }
            }
        }
        const auto tr = traces(x);
        for (std::size_t s = 0; s < tr.size(); ++s)
            stats_.max_trace_drift = std::max(stats_.max_trace_drift, std::abs(tr[s] - trace0_[s]));
    }

    const Problem& problem_;
    IntegratorOptions options_;
    IntegrationStats& stats_;
    odeint::rosenbrock4_controller<odeint::rosenbrock4<double>> controller_;
    double dt_;
    std::vector<double> trace0_;
};

std::vector<double> breakpoints(const DriveModulation& m, double t_end) {
    std::vector<double> out;
    if (m.kind == ModulationKind::step && m.step_time > 0.0 && m.step_time < t_end) out.push_back(m.step_time);
    return out;
}

}  // namespace

StateVector rhs(const StateVector& state, const ModelConfig& config, double t, const DriveModulation& modulation) {
    const Problem problem(config, modulation);
    const UVector x = pack(state, problem.subs.size());
    UVector dx(x.size());
    problem.derivative(x, dx, t);
    return unpack(dx, problem.subs.size());
}

TimeSeries integrate(const ModelConfig& config, const StateVector& initial, double t_end,
                     const DriveModulation& modulation, const IntegratorOptions& options, IntegrationStats* stats) {
    validate(config);
    modulation.check();
    if (!(t_end > 0.0)) throw DomainError("integrate: t_end must be > 0");
    const Problem problem(config, modulation);
    IntegrationStats local;
    IntegrationStats& st = stats ? *stats : local;
    Engine engine(problem, options, st);

    UVector x = pack(initial, problem.subs.size());
    TimeSeries out;
    out.config = config;
    out.t.push_back(0.0);
    out.states.push_back(initial);
    auto record = [&](double t, const UVector& y) {
        out.t.push_back(t);
        out.states.push_back(unpack(y, problem.subs.size()));
    };
    double t = 0.0;
    auto stops = breakpoints(modulation, t_end);
    stops.push_back(t_end);
    for (double stop : stops) engine.advance(x, t, stop, record);
    return out;
}

TimeSeries integrate_sampled(const ModelConfig& config, const StateVector& initial,
                             const std::vector<double>& sample_times, const DriveModulation& modulation,
                             const IntegratorOptions& options, IntegrationStats* stats) {
    validate(config);
    modulation.check();
    if (sample_times.empty()) throw DomainError("integrate_sampled: no sample times");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        if (!(sample_times[i] >= 0.0) || (i > 0 && !(sample_times[i] > sample_times[i - 1])))
            throw DomainError("integrate_sampled: sample times must be >= 0 and strictly increasing");
    }
    const Problem problem(config, modulation);
    IntegrationStats local;
    IntegrationStats& st = stats ? *stats : local;
    Engine engine(problem, options, st);

    UVector x = pack(initial, problem.subs.size());
    TimeSeries out;
    out.config = config;
    double t = 0.0;
    const auto cuts = breakpoints(modulation, sample_times.back());
    auto cut = cuts.begin();
    for (double ts : sample_times) {
        for (; cut != cuts.end() && *cut <= ts; ++cut) engine.advance(x, t, *cut, nullptr);
        engine.advance(x, t, ts, nullptr);
        out.t.push_back(ts);
        out.states.push_back(unpack(x, problem.subs.size()));
    }
    return out;
}

double relaxation_time(const ModelConfig& config) {
    const auto ss = solve_steady_state(config);
    const auto modulation = DriveModulation::constant(config.drive.delta);
    const Problem problem(config, modulation);
    const UVector x = pack(StateVector::from_steady_state(ss), problem.subs.size());
    UMatrix jac(x.size(), x.size());
    UVector dfdt(x.size());
    problem.jacobian(x, jac, 0.0, dfdt);

    const auto dim = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = jac(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues();

    const double scale = ev.cwiseAbs().maxCoeff();
    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& l : ev) {
        if (std::abs(l) <= 1e-9 * scale) continue;  // conserved trace(s) and a marginal n mode
        slowest = std::min(slowest, std::abs(l.real()));
    }
    if (!(slowest > 0.0) || !std::isfinite(slowest)) throw DegenerateConfig("relaxation_time: no decaying mode");
    return 1.0 / slowest;
}

ResponseResult step_response(const ModelConfig& config, double delta_before, double delta_after,
                             const ResponseOptions& options) {
    if (delta_before == delta_after) throw DegenerateStep("step_response: delta_before equals delta_after");
    if (!(options.seed_n > 0.0)) throw DomainError("step_response: seed_n must be > 0");

    ModelConfig before = config;
    before.drive.delta = delta_before;
    ModelConfig after = config;
    after.drive.delta = delta_after;

    ResponseResult r;
    r.initial = solve_steady_state(before);
    r.final_state = solve_steady_state(after);
    const double n0 = r.initial.n;
    const double n1 = r.final_state.n;
    if (std::abs(n1 - n0) <= 1e-9 * std::max(n0, n1) || (n0 == 0.0 && n1 == 0.0))
        throw DegenerateStep("step_response: old and new steady states have the same photon number");

    StateVector state = StateVector::from_steady_state(r.initial);
    state.n = std::max(state.n, options.seed_n);
    r.n_start = state.n;

    const double sign = n1 > n0 ? 1.0 : -1.0;
    const double level63 = n0 + (1.0 - std::exp(-1.0)) * (n1 - n0);
    const double level90 = n0 + 0.9 * (n1 - n0);
    const auto modulation = DriveModulation::constant(delta_after);

    r.trace.config = after;
    r.trace.t.push_back(0.0);
    r.trace.states.push_back(state);

    bool have63 = false;
    double offset = 0.0;
    double window = options.first_window;
    auto crossing = [&](std::size_t k, double level) {
        const double ta = r.trace.t[k - 1], tb = r.trace.t[k];
        const double na = r.trace.states[k - 1].n, nb = r.trace.states[k].n;
        return nb == na ? tb : ta + (level - na) / (nb - na) * (tb - ta);
    };
    while (true) {
        if (offset >= options.max_time)
            throw NoConvergence("step_response: photon number never reached 90% of the step", offset, options.max_time);
        std::vector<double> times;
        for (int i = 1; i <= options.samples_per_window; ++i) times.push_back(window * i / options.samples_per_window);
        const auto part = integrate_sampled(after, state, times, modulation, options.integrator);
        const std::size_t first = r.trace.t.size();
        for (std::size_t i = 0; i < part.t.size(); ++i) {
            r.trace.t.push_back(offset + part.t[i]);
            r.trace.states.push_back(part.states[i]);
        }
        for (std::size_t k = first; k < r.trace.t.size(); ++k) {
            const double n = r.trace.states[k].n;
            if (!have63 && sign * (n - level63) >= 0.0) {
                r.t_63 = crossing(k, level63);
                have63 = true;
            }
            if (have63 && sign * (n - level90) >= 0.0) {
                r.t_90 = crossing(k, level90);
                return r;
            }
        }
        state = part.states.back();
        offset += window;
        window *= 2.0;
    }
}

HarmonicResult ac_response(const ModelConfig& config, double bias, double amplitude, double omega,
                           const HarmonicOptions& options) {
    if (!(amplitude > 0.0)) throw DomainError("ac_response: B_S must be > 0");
    if (!(omega > 0.0)) throw DomainError("ac_response: signal frequency must be > 0");
    if (options.min_periods < 1 || options.samples_per_period < 2 * options.max_harmonic + 2)
        throw DomainError("ac_response: too few periods or samples per period");

    auto at_field = [&](double b) {
        ModelConfig c = config;
        c.drive.delta = b_field_to_detuning(b, config.constants);
        return c;
    };
    const auto lo = solve_steady_state(at_field(bias - amplitude));
    const auto hi = solve_steady_state(at_field(bias + amplitude));
    if (lo.n == 0.0 && hi.n == 0.0)
        throw NoOutput("ac_response: laser below threshold over the whole signal cycle");

    HarmonicResult r;
    const ModelConfig biased = at_field(bias);
    r.relaxation_time = relaxation_time(biased);

    const double period = boost::math::double_constants::two_pi / omega;
    const double transient = std::max(5.0 * period, 10.0 * r.relaxation_time);
    const double transient_periods = std::ceil(transient / period - 1e-9);
    r.transient_time = transient_periods * period;
    r.periods = options.min_periods;

    const int per = options.samples_per_period;
    const int total = r.periods * per;
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(total));
    for (int k = 0; k < total; ++k) times.push_back((transient_periods + static_cast<double>(k) / per) * period);

    StateVector start = StateVector::from_steady_state(hi);
    start.n = std::max(start.n, 1e-9);
    const auto series =
        integrate_sampled(config, start, times, DriveModulation::sinusoid(bias, amplitude, omega), options.integrator);

    // Phases from the sample index: the window starts on a whole period.
    std::vector<double> a(static_cast<std::size_t>(options.max_harmonic) + 1, 0.0);
    std::vector<double> b(a.size(), 0.0);
    double mean = 0.0;
    for (int k = 0; k < total; ++k) {
        const double n = series.states[static_cast<std::size_t>(k)].n;
        mean += n;
        const double phase = boost::math::double_constants::two_pi * static_cast<double>(k % per) / per;
        for (int h = 1; h <= options.max_harmonic; ++h) {
            a[static_cast<std::size_t>(h)] += n * std::cos(h * phase);
            b[static_cast<std::size_t>(h)] += n * std::sin(h * phase);
        }
    }
    r.n_o = mean / total;
    for (std::size_t h = 1; h < a.size(); ++h) {
        a[h] *= 2.0 / total;
        b[h] *= 2.0 / total;
    }
    r.n_S = std::hypot(a[1], b[1]);
    r.phase = std::atan2(b[1], a[1]);
    double higher = 0.0;
    for (std::size_t h = 2; h < a.size(); ++h) higher += a[h] * a[h] + b[h] * b[h];
    const double first = a[1] * a[1] + b[1] * b[1];
    r.distortion = first > 0.0 ? higher / first : 0.0;
    return r;
}

void write_time_series_csv(std::ostream& out, const TimeSeries& series) {
    out << "t,rho11,rho22,rho33,rho44,rho55,rho66,rho77,rho14_re,rho14_im,n,P_out_W\n";
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        const auto& s = series.states[i];
        const auto p = s.average(series.config).to_array();
        out << format_double(series.t[i]);
        for (double v : p) out << ',' << format_double(v);
        out << ',' << format_double(s.n) << ',' << format_double(output_power(s.n, series.config)) << '\n';
    }
}

}  // namespace ltm
