#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "internal.hpp"
#include "nvmag/analysis.hpp"
#include "nvmag/noise.hpp"
#include "nvmag/optimizer.hpp"
#include "nvmag/propagator.hpp"
#include "nvmag/readout.hpp"
#include "nvmag/rng.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/sequences.hpp"
#include "nvmag/parallel.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag::cli {

using nlohmann::json;

namespace {

// --- typed config access ----------------------------------------------------

struct Section {
    const json& node;
    std::string path;

    Section sub(const std::string& key) const { return {node.at(key), path + "." + key}; }

    double num(const std::string& key) const {
        const double v = node.at(key).get<double>();
        if (!std::isfinite(v)) throw ConfigError(path + "." + key + ": must be finite");
        return v;
    }
    std::size_t count(const std::string& key) const {
        const double v = num(key);
        if (v < 0.0 || v != std::floor(v) || v > 1e15)
            throw ConfigError(path + "." + key + ": expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    std::string str(const std::string& key) const { return node.at(key).get<std::string>(); }
    bool flag(const std::string& key) const { return node.at(key).get<bool>(); }
    std::vector<double> list(const std::string& key) const { return node.at(key).get<std::vector<double>>(); }
};

Section section(const json& config, const std::string& key) { return {config.at(key), key}; }

Variant variant_of(const Section& s, const std::string& key, std::initializer_list<Variant> allowed) {
    const std::string text = s.str(key);
    const auto v = parse_variant(text);
    if (v)
        for (Variant a : allowed)
            if (a == *v) return *v;
    std::string names;
    for (Variant a : allowed) names += (names.empty() ? "" : ", ") + std::string(to_string(a));
    throw ConfigError(s.path + "." + key + ": '" + text + "' is not one of " + names);
}

GroundStateParams params_of(const json& config) {
    const Section s = section(config, "constants");
    GroundStateParams p{s.num("d_g"), s.num("d_parallel"), s.num("d_perp"), s.num("gyromag")};
    p.validate();
    return p;
}

EnvironmentFields environment_of(const json& config) {
    const Section s = section(config, "environment");
    return {s.num("b_x"), s.num("b_y"), s.num("b_z"), s.num("e_x"), s.num("e_y"), s.num("e_z")};
}

NoiseModel noise_of(const json& config) {
    const Section s = section(config, "noise");
    NoiseModel n{s.num("sigma_bz"), s.num("sigma_bperp"), s.num("sigma_ez"), s.num("sigma_dg"), s.num("t2"), s.num("p")};
    n.validate();
    return n;
}

ReadoutParams readout_of(const json& config) {
    const Section s = section(config, "readout");
    ReadoutParams r{s.num("bright_counts"), s.num("contrast_c0"), s.num("init_fidelity")};
    r.validate();
    return r;
}

StirapParams stirap_of(const json& config) {
    const Section s = section(config, "stirap");
    StirapParams p;
    p.peak_plus = s.num("peak_plus");
    p.peak_minus = s.num("peak_minus");
    p.sigma = s.num("sigma");
    p.delay = s.num("delay");
    p.delta_plus = s.num("delta_plus");
    p.delta_minus = s.num("delta_minus");
    return p;
}

SequenceContext context_of(const json& config) {
    const Section s = section(config, "sequence");
    SequenceContext ctx;
    ctx.params = params_of(config);
    ctx.base = environment_of(config);
    const std::string mode = s.str("rotations");
    if (mode == "ideal") ctx.rotations = RotationMode::ideal;
    else if (mode == "pulsed") ctx.rotations = RotationMode::pulsed;
    else throw ConfigError("sequence.rotations: expected 'ideal' or 'pulsed'");
    ctx.rabi = s.num("rabi");
    ctx.echo_sigma = s.num("echo_sigma");
    ctx.tol = s.num("tol");
    ctx.stirap = stirap_of(config);
    ctx.validate();
    return ctx;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

struct RunContext {
    const json& config;
    std::uint64_t seed;
    unsigned threads;
    OutputSet& outputs;
    std::ostream& out;
    std::ostream& err;
};

// --- subcommands ------------------------------------------------------------

void cmd_levels(const RunContext& rc) {
    const GroundStateParams params = params_of(rc.config);
    const EnvironmentFields env = environment_of(rc.config);
    std::vector<std::vector<double>> rows;
    for (double bz : section(rc.config, "levels").list("b_z")) {
        EnvironmentFields e = env;
        e.b_z = bz;
        const LevelDiagram d = level_energies(params, e);
        double ratio = std::nan("");
        try {
            ratio = transverse_curvature_ratio(params, bz);
        } catch (const Error&) {
        }
        rows.push_back({bz, d.energy(Level::zero), d.energy(Level::plus), d.energy(Level::minus),
                        transition_frequency(d, Level::zero, Level::minus),
                        transition_frequency(d, Level::zero, Level::plus),
                        transition_frequency(d, Level::minus, Level::plus), ratio});
        char line[160];
        std::snprintf(line, sizeof line, "b_z %.6g nT: f(0,-1) %.6g Hz  f(0,+1) %.6g Hz  f(-1,+1) %.6g Hz\n", bz,
                      rows.back()[4], rows.back()[5], rows.back()[6]);
        rc.out << line;
    }
    rc.outputs.csv("levels.csv",
                   {"b_z_nT", "e0_hz", "e_plus_hz", "e_minus_hz", "f_0_minus_hz", "f_0_plus_hz", "f_minus_plus_hz",
                    "curvature_ratio"},
                   rows);
}

void cmd_odmr(const RunContext& rc) {
    const Section s = section(rc.config, "odmr");
    const SequenceContext ctx = context_of(rc.config);
    const double span = s.num("span");
    const auto grid = linspace(-span, span, s.count("points"));
    const Spectrum spectrum = run_odmr_sweep(ctx, s.num("pi_duration"), grid, noise_of(rc.config), readout_of(rc.config),
                                         s.count("shots_per_point"), rc.seed, rc.threads);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < grid.size(); ++i) rows.push_back({spectrum.detunings[i], spectrum.counts[i]});
    rc.outputs.csv("odmr.csv", {"detuning_hz", "mean_counts"}, rows);
}

void cmd_ramsey(const RunContext& rc) {
    const Section s = section(rc.config, "ramsey");
    const SequenceContext ctx = context_of(rc.config);
    const NoiseModel noise = noise_of(rc.config);
    const ReadoutParams readout = readout_of(rc.config);
    RamseyParams base;
    base.variant = variant_of(s, "variant", {Variant::ramsey_01, Variant::ramsey_pm1});
    base.detuning_offset = s.num("detuning_offset");
    base.field_offset = s.num("field_offset");
    base.readout_phase = s.num("readout_phase");
    const std::size_t shots = s.count("shots");
    if (shots < 1) throw ConfigError("ramsey.shots: must be at least 1");
    const auto times = linspace(s.num("free_time_start"), s.num("free_time_stop"), s.count("points"));

    std::vector<std::vector<double>> rows(times.size());
    parallel_for(times.size(), rc.threads, [&](std::size_t i) {
        RamseyParams p = base;
        p.free_time = times[i];
        double pop = 0.0, counts = 0.0;
        for (std::size_t k = 0; k < shots; ++k) {
            const std::uint64_t shot_seed = derive_seed(rc.seed, "ramsey.shot", i * shots + k);
            const ShotOutcome o = run_ramsey(ctx, p, noise, shot_seed);
            Rng rng = make_stream(shot_seed, "readout");
            pop += o.readout_population;
            counts += static_cast<double>(sample_counts(expected_counts(o.readout_population, readout), rng));
        }
        rows[i] = {times[i], pop / static_cast<double>(shots), counts / static_cast<double>(shots)};
    });
    rc.outputs.csv("ramsey.csv", {"free_time_s", "population", "mean_counts"}, rows);
}

void cmd_stirap(const RunContext& rc) {
    const Section s = section(rc.config, "stirap");
    const SequenceContext ctx = context_of(rc.config);
    const std::string order = s.str("ordering");
    StirapOrdering ordering;
    if (order == "counterintuitive") ordering = StirapOrdering::counterintuitive;
    else if (order == "intuitive") ordering = StirapOrdering::intuitive;
    else throw ConfigError("stirap.ordering: expected 'counterintuitive' or 'intuitive'");
    const DriveSchedule schedule = s.flag("half") ? build_half_stirap(ctx.stirap, StirapHalf::first, ordering)
                                                  : build_stirap(ctx.stirap, ordering);
    const std::size_t samples = s.count("samples");
    if (samples < 2) throw ConfigError("stirap.samples: must be at least 2");
    const PropagationResult r = propagate(schedule, SpinState::basis_state(Level::minus), samples, ctx.tol);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        const Populations p = r.states[i].populations();
        rows.push_back({r.times[i], p[Level::zero], p[Level::plus], p[Level::minus]});
    }
    rc.outputs.csv("stirap.csv", {"time_s", "p_zero", "p_plus", "p_minus"}, rows);
    const Populations f = r.final_state.populations();
    rc.outputs.json("stirap.json", {{"duration_s", schedule.duration},
                                    {"p_zero", f[Level::zero]},
                                    {"p_plus", f[Level::plus]},
                                    {"p_minus", f[Level::minus]}});
}

void cmd_cpmg(const RunContext& rc) {
    const Section s = section(rc.config, "cpmg_ac");
    const SequenceContext ctx = context_of(rc.config);
    const NoiseModel noise = noise_of(rc.config);
    const ReadoutParams readout = readout_of(rc.config);
    CpmgParams base;
    base.variant = variant_of(s, "variant", {Variant::cpmg_ac_01, Variant::cpmg_ac_pm1});
    base.period = s.num("period");
    base.phase = s.num("phase");
    const std::size_t echoes = s.count("echoes");
    base.echoes = static_cast<int>(std::min<std::size_t>(echoes, 1000000));
    base.readout_phase = s.num("readout_phase");
    base.validate();
    const std::size_t shots = s.count("shots");
    if (shots < 1) throw ConfigError("cpmg_ac.shots: must be at least 1");
    const auto amps = linspace(0.0, s.num("amplitude_max"), s.count("points"));

    std::vector<std::vector<double>> rows(amps.size());
    parallel_for(amps.size(), rc.threads, [&](std::size_t i) {
        CpmgParams p = base;
        p.ac_amplitude = amps[i];
        double pop = 0.0, counts = 0.0, phase = 0.0;
        for (std::size_t k = 0; k < shots; ++k) {
            const ShotOutcome o = run_cpmg_ac(ctx, p, noise, readout, derive_seed(rc.seed, "cpmg.shot", i * shots + k));
            pop += o.readout_population;
            counts += static_cast<double>(*o.counts);
            phase = *o.accumulated_phase;
        }
        rows[i] = {amps[i], pop / static_cast<double>(shots), counts / static_cast<double>(shots), phase};
    });
    rc.outputs.csv("cpmg_ac.csv", {"amplitude_nT", "population", "mean_counts", "phase_rad"}, rows);
}

struct GaSetup {
    WaveformGenome baseline;
    FitnessContext fc;
    GaConfig ga;
};

// `nominal` is the one-photon detuning before the adiabaticity floor of
// raman_detuning_for; 0 takes optimize.raman_detuning (itself 0 for 2 MHz).
GaSetup ga_setup(const RunContext& rc, const SequenceContext& ctx, double duration, double nominal = 0.0) {
    const Section s = section(rc.config, "optimize");
    if (!(duration > 0.0)) throw ConfigError("optimize.duration: must be positive");
    GaSetup g;
    if (nominal <= 0.0) nominal = s.num("raman_detuning") > 0.0 ? s.num("raman_detuning") : 2e6;
    const double raman = raman_detuning_for(duration, nominal);
    const double amplitude = two_tone_transfer_amplitude(duration, raman);
    const double amp_max = s.num("amp_max") > 0.0 ? s.num("amp_max") : 2.0 * amplitude;
    if (amplitude > amp_max) throw ConfigError("optimize.amp_max: below the continuous-transfer amplitude");
    g.baseline = constant_genome(s.count("bins"), duration, amp_max, amplitude);

    g.fc.ctx = ctx;
    g.fc.raman_detuning = raman;
    const auto objective = parse_objective(s.str("objective"));
    if (!objective) throw ConfigError("optimize.objective: expected 'slope' or 'slope_per_root_time'");
    g.fc.objective = *objective;

    g.ga.population_size = s.count("population_size");
    g.ga.generations = s.count("generations");
    g.ga.elite_count = s.count("elite_count");
    g.ga.tournament_size = s.count("tournament_size");
    g.ga.mutation_std = s.num("mutation_std");
    g.ga.gene_mutation_rate = s.num("gene_mutation_rate");
    g.ga.crossover_rate = s.num("crossover_rate");
    g.ga.delta_b = s.num("delta_b");
    g.ga.seed = derive_seed(rc.seed, "optimize");
    g.ga.threads = rc.threads;
    try {
        g.ga.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("optimize: ") + e.what());
    }
    if (s.flag("auto_b0")) {
        // Line half-width in field: the two-photon detuning moves by 2 g per nT.
        const double span = 3.0 / (2.0 * ctx.params.gyromag * duration);
        g.fc.b0 = steepest_field(g.baseline, g.fc, span, 121, g.ga.delta_b);
    } else {
        g.fc.b0 = s.num("b0");
    }
    return g;
}

void cmd_optimize(const RunContext& rc) {
    const SequenceContext ctx = context_of(rc.config);
    const GaSetup g = ga_setup(rc, ctx, section(rc.config, "optimize").num("duration"));
    const double baseline = fitness(g.baseline, g.fc, g.ga.delta_b);
    const GaResult r = evolve(g.ga, g.baseline, g.fc);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < r.history.size(); ++i) rows.push_back({static_cast<double>(i), r.history[i]});
    rc.outputs.csv("history.csv", {"generation", "best_fitness"}, rows);
    rc.outputs.json("genome.json", json(r.best));
    rc.outputs.json("optimize.json", {{"best_fitness", r.best_fitness},
                                      {"baseline_fitness", baseline},
                                      {"b0_nT", g.fc.b0},
                                      {"raman_detuning_hz", g.fc.raman_detuning},
                                      {"objective", to_string(g.fc.objective)}});
    char line[128];
    std::snprintf(line, sizeof line, "best fitness %.6g (baseline %.6g)\n", r.best_fitness, baseline);
    rc.out << line;
}

void cmd_sensitivity(const RunContext& rc, const std::string& mode) {
    const Section s = section(rc.config, "sensitivity");
    const GroundStateParams params = params_of(rc.config);
    if (mode == "ac") {
        const Section a = s.sub("ac");
        const double ds = a.num("delta_s");
        if (ds != 1.0 && ds != 2.0) throw ConfigError("sensitivity.ac.delta_s: must be 1 or 2");
        SensitivityReport r;
        r.method = "ac";
        r.n_photons = a.num("n_photons");
        r.tau = a.num("tau");
        r.operating_point = r.tau;
        r.delta_s = static_cast<int>(ds);
        r.c0 = a.num("c0");
        r.t2 = a.num("t2");
        r.p = a.num("p");
        r.min_field = ac_sensitivity(r.n_photons, r.tau, *r.c0, *r.t2, *r.p, r.delta_s, params.gyromag);
        rc.outputs.json("sensitivity.json", json(r));
        rc.out << "ac minimum field " << format_number(r.min_field) << " nT/sqrt(Hz)\n";
        return;
    }
    if (mode == "dc") {
        const Section d = s.sub("dc");
        SensitivityReport r;
        r.method = "dc";
        r.tau = d.num("tau");
        r.n_photons = d.num("n_photons");
        r.g_max = d.num("g_max");
        r.min_field = dc_sensitivity(r.tau, r.n_photons, *r.g_max);
        rc.outputs.json("sensitivity.json", json(r));
        rc.out << "dc minimum field " << format_number(r.min_field) << " nT/sqrt(Hz)\n";
        return;
    }
    if (mode != "curve") throw ConfigError("sensitivity.mode: expected 'ac', 'dc' or 'curve'");
    const Section c = s.sub("curve");
    const auto family = parse_family(c.str("family"));
    if (!family) throw ConfigError("sensitivity.curve.family: expected pulsed_odmr, continuous_two_tone or optimized");
    const SequenceContext ctx = context_of(rc.config);
    CurveOptions opt;
    opt.grid_points = c.count("grid_points");
    opt.span = c.num("span");
    opt.draws = c.count("draws");
    opt.overhead = c.num("overhead");
    opt.raman_detuning = c.num("raman_detuning");
    opt.seed = derive_seed(rc.seed, "sensitivity.curve");
    opt.threads = rc.threads;
    if (*family == SequenceFamily::optimized) {
        opt.genome_for = [&](double duration) {
            const GaSetup g = ga_setup(rc, ctx, duration, opt.raman_detuning);
            return evolve(g.ga, g.baseline, g.fc).best;
        };
    }
    const auto reports =
        sensitivity_vs_duration(*family, c.list("durations"), ctx, noise_of(rc.config), readout_of(rc.config), opt);
    std::vector<std::vector<double>> rows;
    for (const auto& r : reports) rows.push_back({r.tau, r.min_field, *r.g_max, r.n_photons, r.operating_point});
    rc.outputs.csv("sensitivity_curve.csv",
                   {"tau_s", "min_field_nT_per_rtHz", "g_max_counts_per_nT", "n_photons", "operating_hz"}, rows);
}

void cmd_track(const RunContext& rc) {
    const Section s = section(rc.config, "track_field");
    const SequenceContext ctx = context_of(rc.config);
    const NoiseModel noise = noise_of(rc.config);
    const ReadoutParams readout = readout_of(rc.config);
    FringeSetup setup;
    setup.variant = variant_of(s, "variant", {Variant::ramsey_01, Variant::ramsey_pm1, Variant::continuous_two_tone});
    setup.free_time = s.num("free_time");
    const std::size_t draws = s.count("calibration_draws");
    const std::uint64_t cal_seed = derive_seed(rc.seed, "track.calibration");
    const FieldResponse response = fringe_response(setup, ctx, noise, readout, draws, cal_seed);
    const CalibrationCurve cal = calibrate_fringe(setup, ctx, noise, readout, draws, cal_seed);

    const std::size_t steps = s.count("steps"), dwell = std::max<std::size_t>(1, s.count("dwell"));
    const std::size_t levels = std::max<std::size_t>(1, s.count("levels"));
    const double step = s.num("step_size");
    std::vector<double> truth(steps);
    for (std::size_t k = 0; k < steps; ++k)
        truth[k] = step * (static_cast<double>((k / dwell) % levels) - 0.5 * static_cast<double>(levels - 1));
    const auto posts = track_field(cal, response, truth, s.count("shots_per_step"), rc.seed, rc.threads);

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < steps; ++k)
        rows.push_back({static_cast<double>(k), truth[k], posts[k].mean, posts[k].lower, posts[k].upper,
                        posts[k].at_edge ? 1.0 : 0.0});
    rc.outputs.csv("track.csv", {"step", "true_field_nT", "estimate_nT", "lower_nT", "upper_nT", "flagged"}, rows);
    std::vector<std::vector<double>> cal_rows;
    for (std::size_t i = 0; i < cal.fields.size(); ++i) cal_rows.push_back({cal.fields[i], cal.counts[i]});
    rc.outputs.csv("calibration.csv", {"field_nT", "mean_counts"}, cal_rows);
    if (!posts.empty()) {
        std::vector<std::vector<double>> post_rows;
        for (std::size_t i = 0; i < posts[0].fields.size(); ++i)
            post_rows.push_back({posts[0].fields[i], posts[0].density[i]});
        rc.outputs.csv("posterior_step0.csv", {"field_nT", "density"}, post_rows);
    }
}

void cmd_allan(const RunContext& rc) {
    const Section s = section(rc.config, "allan");
    const SequenceContext ctx = context_of(rc.config);
    StabilityConfig cfg;
    cfg.setup.variant = variant_of(s, "variant", {Variant::ramsey_01, Variant::ramsey_pm1, Variant::continuous_two_tone});
    cfg.setup.free_time = s.num("free_time");
    cfg.total_duration = s.num("total_duration");
    cfg.cadence = s.num("cadence");
    cfg.shots_per_interval = s.count("shots_per_interval");
    cfg.field = s.num("field");
    cfg.noise = noise_of(rc.config);
    cfg.readout = readout_of(rc.config);
    cfg.taus = s.list("taus");
    cfg.seed = derive_seed(rc.seed, "allan");
    cfg.threads = rc.threads;
    cfg.calibration_draws = s.count("calibration_draws");

    const std::string channel = s.str("drift_channel");
    const std::string csv = s.str("drift_csv");
    if (channel != "none") {
        DriftChannel ch;
        if (channel == "bz") ch = DriftChannel::bz;
        else if (channel == "dg") ch = DriftChannel::dg;
        else throw ConfigError("allan.drift_channel: expected 'none', 'bz' or 'dg'");
        if (!csv.empty()) {
            cfg.drifts.push_back(load_drift_csv(csv, ch));
        } else if (s.num("drift_rate") != 0.0) {
            DriftTrace d;
            d.channel = ch;
            d.times = {0.0, cfg.total_duration};
            d.offsets = {0.0, s.num("drift_rate") * cfg.total_duration};
            cfg.drifts.push_back(d);
        }
    } else if (!csv.empty()) {
        throw ConfigError("allan.drift_csv: needs allan.drift_channel set to 'bz' or 'dg'");
    }
    const StabilityResult r = stability_experiment(ctx, cfg);
    write_record_csv(rc.outputs.dir() / "record.csv", r.record);
    rc.outputs.adopt("record.csv");
    write_allan_csv(rc.outputs.dir() / "allan.csv", r.allan);
    rc.outputs.adopt("allan.csv");
    for (const auto& n : r.allan.notices) rc.err << "notice: " << n << "\n";
}

const std::vector<std::pair<std::string, std::string>> kCommands{
    {"levels", "ground-state level and transition table"},
    {"odmr", "pulsed ODMR sweep"},
    {"ramsey", "Ramsey fringe vs free-evolution time"},
    {"stirap", "STIRAP population trajectory"},
    {"cpmg-ac", "CPMG response vs AC field amplitude"},
    {"sensitivity", "DC/AC minimum detectable field"},
    {"optimize", "genetic waveform search"},
    {"track-field", "field reconstruction from photon counts"},
    {"allan", "stability campaign and Allan deviation"},
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"nvmag: NV-centre spin magnetometry simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path, out_dir = "nvmag_out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::vector<std::string> sets;
    bool strict = false, ac = false, dc = false, curve = false;

    for (const auto& [name, help] : kCommands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "YAML or JSON config file");
        sub->add_option("--seed", seed, "root random seed (overrides the config)");
        sub->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
        sub->add_option("--set", sets, "override, e.g. --set noise.sigma_bz=10")->take_all();
        sub->add_option("--threads", threads, "worker threads (overrides the config)");
        sub->add_flag("--strict", strict, "reject config sections this subcommand does not read");
        if (name == "sensitivity") {
            sub->add_flag("--ac", ac, "AC echo formula");
            sub->add_flag("--dc", dc, "DC gradient formula");
            sub->add_flag("--curve", curve, "DC sensitivity vs sequence duration");
        }
    }

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ExitCode::ok : ExitCode::config_error;
    }
    const std::string subcommand = app.get_subcommands().front()->get_name();

    try {
        json user = json::object();
        if (!config_path.empty()) user = read_config_file(config_path);
        json config = merge_config(user);
        std::set<std::string> touched;
        for (const auto& [key, _] : user.items()) touched.insert(key);
        for (const auto& s : sets) {
            apply_override(config, s);
            touched.insert(s.substr(0, s.find_first_of(".=")));
        }
        if (strict) {
            const auto used = consumed_sections(subcommand);
            for (const auto& key : touched)
                if (std::find(used.begin(), used.end(), key) == used.end())
                    throw ConfigError(key + ": section is not used by '" + subcommand + "' (strict mode)");
        }
        if (seed) config["seed"] = *seed;
        if (threads) config["threads"] = *threads;
        const Section root{config, ""};
        const std::uint64_t root_seed = static_cast<std::uint64_t>(config.at("seed").get<double>());
        if (config.at("seed").get<double>() < 0.0) throw ConfigError("seed: must be non-negative");
        const unsigned worker_count = static_cast<unsigned>(std::max<std::size_t>(1, root.count("threads")));

        OutputSet outputs(out_dir);
        const RunContext rc{config, root_seed, worker_count, outputs, out, err};
        if (subcommand == "levels") cmd_levels(rc);
        else if (subcommand == "odmr") cmd_odmr(rc);
        else if (subcommand == "ramsey") cmd_ramsey(rc);
        else if (subcommand == "stirap") cmd_stirap(rc);
        else if (subcommand == "cpmg-ac") cmd_cpmg(rc);
        else if (subcommand == "sensitivity") {
            std::string mode = section(config, "sensitivity").str("mode");
            if (ac + dc + curve > 1) throw ConfigError("sensitivity: choose one of --ac, --dc, --curve");
            if (ac) mode = "ac";
            if (dc) mode = "dc";
            if (curve) mode = "curve";
            cmd_sensitivity(rc, mode);
        } else if (subcommand == "optimize") cmd_optimize(rc);
        else if (subcommand == "track-field") cmd_track(rc);
        else if (subcommand == "allan") cmd_allan(rc);
        outputs.manifest(subcommand, config, root_seed);
        return ExitCode::ok;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const InvalidInput& e) {
        err << "config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const Error& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitCode::numerical_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ExitCode::numerical_error;
    }
}

}  // namespace nvmag::cli
