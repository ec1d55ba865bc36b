// Command-line front end: steady states, sweeps, dynamics, sensitivities and
// figure experiments. Tables go to stdout (or --out) as CSV or JSON.

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ltm/config_io.hpp"
#include "ltm/dynamics.hpp"
#include "ltm/errors.hpp"
#include "ltm/experiments.hpp"
#include "ltm/model.hpp"
#include "ltm/sensitivity.hpp"
#include "ltm/steady_state.hpp"

namespace {

using namespace ltm;

struct Globals {
    std::string preset = "baseline";
    std::string config_file;
    std::vector<std::string> sets;
    std::string out;
    std::string format = "csv";
    bool at_operating_point = false;
};

std::vector<std::pair<std::string, std::string>> parse_sets(const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
}

std::string label_of(const Globals& g) { return g.config_file.empty() ? g.preset : "config:" + g.config_file; }

ModelConfig build_config(const Globals& g) {
    ModelConfig c = g.config_file.empty() ? preset(preset_from_name(g.preset)) : load_config_file(g.config_file);
    for (const auto& [k, v] : parse_sets(g.sets)) set_parameter(c, k, v);
    validate(c);
    if (g.at_operating_point) c = at_operating_point(c);
    return c;
}

void emit(const Globals& g, const std::vector<OutputTable>& tables) {
    const std::string text = g.format == "json" ? (tables.size() == 1 ? to_json(tables[0]) : to_json(tables))
                                                : to_csv(tables);
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(g.out);
    if (!f) throw UsageError("cannot write '" + g.out + "'");
    f << text;
}

OutputTable single_row(const Globals& g, const ModelConfig& c, std::string name, std::vector<Column> columns,
                       std::vector<std::optional<double>> row) {
    OutputTable t;
    t.columns = std::move(columns);
    t.rows.push_back(std::move(row));
    t.add_provenance("table", std::move(name));
    stamp_provenance(t, c, label_of(g));
    return t;
}

std::optional<double> finite_or_absent(double v) { return std::isfinite(v) ? std::optional(v) : std::nullopt; }

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const InvalidConfig*>(&e)) return 1;
    if (dynamic_cast<const NoConvergence*>(&e) || dynamic_cast<const StiffnessFailure*>(&e)) return 2;
    if (dynamic_cast<const Error*>(&e)) return 3;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laser threshold magnetometer simulator"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    auto* preset_opt = app.add_option("--preset", g.preset, "baseline | high_sensitivity");
    app.add_option("--config", g.config_file, "config file (.json or sectioned key = value text)")->excludes(preset_opt);
    app.add_option("--set", g.sets, "override, e.g. --set drive.omega=3e6 or --set 'geometry.nv_concentration=16 ppm'");
    app.add_option("--out", g.out, "output path (default stdout)");
    app.add_option("--format", g.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--at-operating-point", g.at_operating_point, "move the pump to the operating point first");

    // steady-state
    auto* ss_cmd = app.add_subcommand("steady-state", "stationary populations and photon number");
    std::optional<double> ss_delta, ss_field;
    ss_cmd->add_option("--delta", ss_delta, "detuning, rad/s (default: config)");
    ss_cmd->add_option("--field", ss_field, "field, T (sets the detuning)");

    // sweep
    auto* sw_cmd = app.add_subcommand("sweep", "steady-state grid over one or two parameters");
    std::string sw_axis1, sw_axis2;
    std::vector<std::string> sw_outputs{"n", "P_out"};
    unsigned sw_threads = 0;
    sw_cmd->add_option("--axis1", sw_axis1, "path:min:max:points[:log], canonical units")->required();
    sw_cmd->add_option("--axis2", sw_axis2, "second axis (varies fastest)");
    sw_cmd->add_option("--output", sw_outputs, "n, P_out, populations, eta")->delimiter(',');
    sw_cmd->add_option("--threads", sw_threads, "worker threads (0 = all cores)");

    // response
    auto* rs_cmd = app.add_subcommand("response", "step response of n to a detuning jump");
    double rs_from = 0.0, rs_to = 100e6, rs_seed = 1e-6;
    std::string rs_trace;
    rs_cmd->add_option("--from", rs_from, "detuning before the step, rad/s");
    rs_cmd->add_option("--to", rs_to, "detuning after the step, rad/s");
    rs_cmd->add_option("--seed", rs_seed, "photon number floor when starting dark");
    rs_cmd->add_option("--trace", rs_trace, "also write the trajectory CSV to this path");

    // ac
    auto* ac_cmd = app.add_subcommand("ac", "time-domain response to B_o + B_S cos(2 pi f t)");
    double ac_bias = 164e-6, ac_amp = 1e-9, ac_freq = 1e4;
    ac_cmd->add_option("--bias", ac_bias, "B_o, T");
    ac_cmd->add_option("--amplitude", ac_amp, "B_S, T");
    ac_cmd->add_option("--frequency", ac_freq, "signal frequency, Hz");

    // sensitivity-dc
    auto* sd_cmd = app.add_subcommand("sensitivity-dc", "d.c. shot-noise sensitivity");
    std::optional<double> sd_field;
    double sd_min = -300e-6, sd_max = 300e-6;
    int sd_points = 121;
    bool sd_minimize = false;
    sd_cmd->add_option("--field", sd_field, "single field, T");
    sd_cmd->add_option("--min", sd_min, "curve start, T");
    sd_cmd->add_option("--max", sd_max, "curve end, T");
    sd_cmd->add_option("--points", sd_points, "curve points");
    sd_cmd->add_flag("--minimize", sd_minimize, "report the minimum over [min, max] instead of the curve");

    // sensitivity-ac
    auto* sa_cmd = app.add_subcommand("sensitivity-ac", "a.c. shot-noise sensitivity");
    double sa_bias = 164e-6, sa_amp = 1e-9, sa_freq = 1e4, sa_i = 2.43;
    std::string sa_method = "timedomain";
    sa_cmd->add_option("--bias", sa_bias, "B_o, T");
    sa_cmd->add_option("--amplitude", sa_amp, "B_S, T");
    sa_cmd->add_option("--frequency", sa_freq, "signal frequency, Hz");
    sa_cmd->add_option("--i-factor", sa_i, "per-period signal factor I");
    sa_cmd->add_option("--method", sa_method, "timedomain | quasistatic")
        ->check(CLI::IsMember({"timedomain", "quasistatic"}));

    // operating-point
    auto* op_cmd = app.add_subcommand("operating-point", "pump rate at threshold on RF resonance");
    std::optional<double> op_omega;
    op_cmd->add_option("--omega", op_omega, "Rabi rate, rad/s (default: config)");

    // optimize
    auto* opt_cmd = app.add_subcommand("optimize", "Nelder-Mead over kappa, lambda, omega minimising eta_dc");
    std::vector<std::string> opt_free{"kappa", "lambda", "omega"};
    double opt_decades = 1.0, opt_window = 300e-6;
    int opt_evals = 200;
    opt_cmd->add_option("--free", opt_free, "free parameters (kappa, lambda, omega)")->delimiter(',');
    opt_cmd->add_option("--decades", opt_decades, "bounds: start value times/divided by 10^decades");
    opt_cmd->add_option("--window", opt_window, "eta minimised over B in (0, window], T");
    opt_cmd->add_option("--max-evaluations", opt_evals, "objective evaluation budget");

    // experiment
    auto* ex_cmd = app.add_subcommand("experiment", "figure reproduction: fig1b fig2a fig2b fig3a fig3b fig4");
    std::string ex_name;
    ex_cmd->add_option("name", ex_name, "experiment name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (ex_cmd->parsed()) {
            if (!g.config_file.empty()) throw UsageError("experiment uses its own presets; pass --set overrides only");
            emit(g, run_experiment(experiment_from_name(ex_name), parse_sets(g.sets)));
            return 0;
        }

        const ModelConfig config = build_config(g);

        if (ss_cmd->parsed()) {
            ModelConfig c = config;
            if (ss_delta && ss_field) throw UsageError("give --delta or --field, not both");
            if (ss_delta) c.drive.delta = *ss_delta;
            if (ss_field) c.drive.delta = b_field_to_detuning(*ss_field, c.constants);
            const auto r = solve_steady_state(c);
            std::vector<Column> cols{{"delta", "rad/s"}, {"B", "T"},           {"n", "1"},
                                     {"P_out", "W"},     {"above_threshold", "1"}, {"net_gain", "rad/s"},
                                     {"residual", "1/s"}};
            std::vector<std::optional<double>> row{c.drive.delta, detuning_to_b_field(c.drive.delta, c.constants), r.n,
                                                   output_power(r.n, c),
                                                   r.branch == Branch::above_threshold ? 1.0 : 0.0, r.net_gain_at_n,
                                                   r.residual};
            const char* names[] = {"rho11", "rho22", "rho33", "rho44", "rho55", "rho66", "rho77", "rho14_re", "rho14_im"};
            const auto p = r.populations.to_array();
            for (std::size_t i = 0; i < p.size(); ++i) {
                cols.push_back({names[i], "1"});
                row.push_back(p[i]);
            }
            emit(g, {single_row(g, c, "steady_state", cols, row)});
        } else if (sw_cmd->parsed()) {
            SweepSpec spec;
            spec.axis1 = parse_axis(sw_axis1);
            if (!sw_axis2.empty()) spec.axis2 = parse_axis(sw_axis2);
            spec.outputs.clear();
            for (const auto& o : sw_outputs) spec.outputs.push_back(parse_sweep_output(o));
            emit(g, {run_sweep(spec, config, {sw_threads, label_of(g)})});
        } else if (rs_cmd->parsed()) {
            ResponseOptions opts;
            opts.seed_n = rs_seed;
            const auto r = step_response(config, rs_from, rs_to, opts);
            if (!rs_trace.empty()) {
                std::ofstream f(rs_trace);
                if (!f) throw UsageError("cannot write '" + rs_trace + "'");
                write_time_series_csv(f, r.trace);
            }
            emit(g, {single_row(g, config, "step_response",
                                {{"delta_before", "rad/s"}, {"delta_after", "rad/s"}, {"t_63", "s"}, {"t_90", "s"},
                                 {"n_before", "1"}, {"n_after", "1"}, {"n_start", "1"}},
                                {rs_from, rs_to, r.t_63, r.t_90, r.initial.n, r.final_state.n, r.n_start})});
        } else if (ac_cmd->parsed()) {
            const double omega = 2.0 * std::numbers::pi * ac_freq;
            const auto h = ac_response(config, ac_bias, ac_amp, omega);
            emit(g, {single_row(g, config, "ac_response",
                                {{"bias", "T"}, {"amplitude", "T"}, {"frequency", "Hz"}, {"n_o", "1"}, {"n_S", "1"},
                                 {"phase", "rad"}, {"distortion", "1"}, {"periods", "1"}, {"transient", "s"},
                                 {"relaxation_time", "s"}},
                                {ac_bias, ac_amp, ac_freq, h.n_o, h.n_S, h.phase, h.distortion,
                                 static_cast<double>(h.periods), h.transient_time, h.relaxation_time})});
        } else if (sd_cmd->parsed()) {
            const std::vector<Column> cols{{"B", "T"},           {"n", "1"},       {"dn_dB", "1/T"},
                                           {"shot_factor", "s^0.5"}, {"eta", "T/sqrt(Hz)"}, {"step", "T"},
                                           {"richardson_error", "1"}};
            auto row_of = [](const SensitivityResult& r) -> std::vector<std::optional<double>> {
                return {r.field, r.n, r.dn_dB, r.shot_factor, finite_or_absent(r.eta), r.step, r.richardson_error};
            };
            OutputTable t;
            t.columns = cols;
            if (sd_field) {
                t.rows.push_back(row_of(dc_sensitivity(config, *sd_field)));
            } else if (sd_minimize) {
                t.rows.push_back(row_of(minimize_dc_sensitivity(config, sd_min, sd_max)));
            } else {
                const auto grid = linear_grid(sd_min, sd_max, sd_points);
                const auto curve = dc_sensitivity_curve(config, grid);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    if (curve[i]) t.rows.push_back(row_of(*curve[i]));
                    else t.rows.push_back({grid[i], 0.0, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                                           std::nullopt});
                }
            }
            t.add_provenance("table", "sensitivity_dc");
            stamp_provenance(t, config, label_of(g));
            emit(g, {t});
        } else if (sa_cmd->parsed()) {
            AcSignalModel s{sa_i, sa_bias, sa_amp, 2.0 * std::numbers::pi * sa_freq};
            AcOptions opts;
            opts.method = sa_method == "quasistatic" ? SensitivityMethod::ac_quasistatic : SensitivityMethod::ac_timedomain;
            const auto r = ac_sensitivity(config, s, opts);
            auto t = single_row(g, config, "sensitivity_ac",
                                {{"bias", "T"}, {"amplitude", "T"}, {"frequency", "Hz"}, {"n_o", "1"},
                                 {"dnS_dBS", "1/T"}, {"shot_factor", "s^0.5"}, {"eta_ac", "T/sqrt(Hz)"}},
                                {sa_bias, sa_amp, sa_freq, r.n, r.dn_dB, r.shot_factor, finite_or_absent(r.eta)});
            t.add_provenance("method", std::string(method_name(r.method)));
            emit(g, {t});
        } else if (op_cmd->parsed()) {
            const double omega = op_omega.value_or(config.drive.omega);
            const double op = find_operating_point(config, omega);
            emit(g, {single_row(g, config, "operating_point", {{"omega", "rad/s"}, {"lambda", "rad/s"}},
                                {omega, op})});
        } else if (opt_cmd->parsed()) {
            std::vector<ParameterBound> bounds;
            const double span = std::pow(10.0, opt_decades);
            for (const auto& name : opt_free) {
                FreeParameter p;
                double v;
                if (name == "kappa") p = FreeParameter::kappa, v = config.geometry.kappa;
                else if (name == "lambda") p = FreeParameter::lambda, v = config.drive.lambda12;
                else if (name == "omega") p = FreeParameter::omega, v = config.drive.omega;
                else throw UsageError("unknown free parameter '" + name + "' (kappa, lambda, omega)");
                bounds.push_back({p, v / span, v * span});
            }
            OptimizeOptions opts;
            opts.field_window = opt_window;
            opts.max_evaluations = opt_evals;
            const auto o = optimize_sensitivity(config, bounds, opts);
            auto t = single_row(g, config, "optimize",
                                {{"kappa", "rad/s"}, {"lambda", "rad/s"}, {"omega", "rad/s"}, {"eta", "T/sqrt(Hz)"},
                                 {"field", "T"}, {"start_eta", "T/sqrt(Hz)"}, {"evaluations", "1"}, {"converged", "1"}},
                                {o.kappa, o.lambda, o.omega, o.best_eta, o.best_field, finite_or_absent(o.start_eta),
                                 static_cast<double>(o.evaluations), o.converged ? 1.0 : 0.0});
            t.add_provenance("start_lifted_to_operating_point", o.start_lifted ? "true" : "false");
            emit(g, {t});
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}
