#include "nvmag/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvmag/error.hpp"
#include "nvmag/parallel.hpp"

namespace nvmag {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pm1(Variant v) {
    return v == Variant::ramsey_pm1 || v == Variant::cpmg_ac_pm1 || v == Variant::stirap ||
           v == Variant::half_stirap || v == Variant::continuous_two_tone || v == Variant::custom_waveform;
}

Eigen::Vector3cd basis_vector(Level l) { return SpinState::basis_state(l).amplitudes(); }

Eigen::Vector3cd run_schedule(const DriveSchedule& schedule, const Eigen::Vector3cd& psi, double tol) {
    return evolve(schedule, SpinState::normalized(psi), tol).amplitudes();
}

Populations populations_of(const Eigen::Matrix3cd& rho) {
    Populations p;
    for (Level l : kLevels) {
        const auto i = static_cast<Eigen::Index>(slot(l));
        p[l] = std::max(0.0, rho(i, i).real());
    }
    const double total = p.sum();
    for (double& v : p.values) v /= total;
    return p;
}

Populations populations_of(const Eigen::Vector3cd& psi) {
    return populations_of(Eigen::Matrix3cd(psi * psi.adjoint()));
}

// Square pulse on {0,-1} through the rotating-frame Hamiltonian. Rotation
// angle theta needs 2 pi * rabi * t = theta / 2.
DriveSchedule square_pulse_01(const SequenceContext& ctx, double angle, double phase,
                              const std::array<double, 3>& shifts) {
    const double duration = angle / (2.0 * kTwoPi * ctx.rabi);
    DriveSchedule s;
    s.envelope_minus = PulseEnvelope::constant(ctx.rabi, 0.0, duration);
    s.envelope_minus.window_stop = std::nextafter(duration, 2.0 * duration);
    s.duration = duration;
    s.level_shifts = shifts;
    if (phase != 0.0) {
        s.envelope_minus = PulseEnvelope::piecewise({0.0, s.envelope_minus.window_stop}, {ctx.rabi}, {phase});
    }
    return s;
}

// Synchronous Gaussian Omega+ = Omega- pulse whose bright-state area is a
// full 2 pi cycle: the bright combination of |+-1> returns with a sign flip
// and the dark combination is untouched, i.e. a pi rotation of the |+-1>
// qubit about the dark-state axis.
DriveSchedule synchronous_echo(const SequenceContext& ctx, const std::array<double, 3>& shifts) {
    const double sigma = ctx.echo_sigma;
    const double amplitude = 1.0 / (2.0 * std::sqrt(2.0) * sigma * std::sqrt(kTwoPi));
    DriveSchedule s;
    s.envelope_plus = PulseEnvelope::gaussian(amplitude, 4.0 * sigma, sigma);
    s.envelope_minus = PulseEnvelope::gaussian(amplitude, 4.0 * sigma, sigma);
    s.duration = 8.0 * sigma;
    s.level_shifts = shifts;
    return s;
}

// Diagonal free-evolution factors for time t: each level advances by its
// energy shift relative to `anchor`, plus `frame_offset` on `other`.
Eigen::Vector3cd free_factors(const LevelDiagram& ref, const LevelDiagram& cur, Level anchor, Level other,
                              double frame_offset, double t, double* pair_phase = nullptr) {
    Eigen::Vector3cd f;
    for (Level l : kLevels) {
        double shift = cur.difference(l, anchor) - ref.difference(l, anchor);
        if (l == other) shift += frame_offset;
        const double phase = kTwoPi * shift * t;
        if (l == other && pair_phase) *pair_phase = phase;
        f(static_cast<Eigen::Index>(slot(l))) = std::polar(1.0, -phase);
    }
    return f;
}

// d(E_other - E_start)/dBz at the reference environment, Hz/nT.
double pair_field_slope(const SequenceContext& ctx, SensingPair pair) {
    constexpr double step = 1.0;  // nT
    EnvironmentFields up = ctx.base, down = ctx.base;
    up.b_z += step;
    down.b_z -= step;
    const double fu = level_energies(ctx.params, up).difference(pair.other, pair.start);
    const double fd = level_energies(ctx.params, down).difference(pair.other, pair.start);
    return (fu - fd) / (2.0 * step);
}

struct Stage {
    Eigen::Vector3cd psi;
    double duration = 0.0;
};

// |0> -> superposition of the sensing pair.
Stage open_superposition(const SequenceContext& ctx, Variant variant, const std::array<double, 3>& shifts) {
    const SensingPair pair = sensing_pair(variant);
    Stage st{basis_vector(Level::zero), 0.0};
    if (ctx.rotations == RotationMode::ideal) {
        if (is_pm1(variant)) st.psi = pair_rotation(Level::zero, Level::minus, kPi, 0.0) * st.psi;
        st.psi = pair_rotation(pair.start, pair.other, 0.5 * kPi, 0.0) * st.psi;
        return st;
    }
    if (is_pm1(variant)) {
        const DriveSchedule pi = square_pulse_01(ctx, kPi, 0.0, shifts);
        st.psi = run_schedule(pi, st.psi, ctx.tol);
        DriveSchedule half = build_half_stirap(ctx.stirap, StirapHalf::first);
        half.level_shifts = shifts;
        st.psi = run_schedule(half, st.psi, ctx.tol);
        st.duration = pi.duration + half.duration;
    } else {
        const DriveSchedule pi2 = square_pulse_01(ctx, 0.5 * kPi, 0.0, shifts);
        st.psi = run_schedule(pi2, st.psi, ctx.tol);
        st.duration = pi2.duration;
    }
    return st;
}

// Closing unitary of the interferometer (canonical basis) and its duration.
std::pair<Eigen::Matrix3cd, double> closing_unitary(const SequenceContext& ctx, Variant variant,
                                                    double readout_phase, const std::array<double, 3>& shifts) {
    const SensingPair pair = sensing_pair(variant);
    if (ctx.rotations == RotationMode::ideal)
        return {pair_rotation(pair.start, pair.other, 0.5 * kPi, readout_phase), 0.0};
    DriveSchedule s;
    if (is_pm1(variant)) {
        s = build_half_stirap(ctx.stirap, StirapHalf::second);
        s.level_shifts = shifts;
    } else {
        s = square_pulse_01(ctx, 0.5 * kPi, readout_phase, shifts);
    }
    Eigen::Matrix3cd u;
    for (Level l : kLevels) u.col(static_cast<Eigen::Index>(slot(l))) = run_schedule(s, basis_vector(l), ctx.tol);
    return {u, s.duration};
}

// Echo pi rotation about the prepared superposition axis.
std::pair<Eigen::Matrix3cd, double> echo_unitary(const SequenceContext& ctx, Variant variant,
                                                 const std::array<double, 3>& shifts) {
    const SensingPair pair = sensing_pair(variant);
    if (ctx.rotations == RotationMode::ideal) return {pair_rotation(pair.start, pair.other, kPi, 0.5 * kPi), 0.0};
    const DriveSchedule s = is_pm1(variant) ? synchronous_echo(ctx, shifts) : square_pulse_01(ctx, kPi, 0.5 * kPi, shifts);
    Eigen::Matrix3cd u;
    for (Level l : kLevels) u.col(static_cast<Eigen::Index>(slot(l))) = run_schedule(s, basis_vector(l), ctx.tol);
    return {u, s.duration};
}

ShotOutcome finish(const Populations& pops, Variant variant, double duration) {
    ShotOutcome out;
    out.populations = pops;
    out.readout_population = pops[readout_level(variant)];
    out.duration = duration;
    return out;
}

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::pulsed_odmr: return "pulsed_odmr";
        case Variant::ramsey_01: return "ramsey_01";
        case Variant::ramsey_pm1: return "ramsey_pm1";
        case Variant::stirap: return "stirap";
        case Variant::half_stirap: return "half_stirap";
        case Variant::cpmg_ac_01: return "cpmg_ac_01";
        case Variant::cpmg_ac_pm1: return "cpmg_ac_pm1";
        case Variant::continuous_two_tone: return "continuous_two_tone";
        case Variant::custom_waveform: return "custom_waveform";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view text) {
    for (Variant v : {Variant::pulsed_odmr, Variant::ramsey_01, Variant::ramsey_pm1, Variant::stirap,
                      Variant::half_stirap, Variant::cpmg_ac_01, Variant::cpmg_ac_pm1,
                      Variant::continuous_two_tone, Variant::custom_waveform})
        if (to_string(v) == text) return v;
    return std::nullopt;
}

SensingPair sensing_pair(Variant v) {
    if (is_pm1(v)) return {Level::minus, Level::plus};
    return {Level::zero, Level::minus};
}

int variant_delta_s(Variant v) { return is_pm1(v) ? 2 : 1; }

Level readout_level(Variant v) { return is_pm1(v) ? Level::minus : Level::zero; }

void StirapParams::validate() const {
    if (!(sigma > 0.0) || !(delay > 0.0)) throw InvalidInput("STIRAP sigma and delay must be positive");
    if (!(peak_plus >= 0.0) || !(peak_minus >= 0.0)) throw InvalidInput("STIRAP peaks must be non-negative");
    if (delay >= total_duration()) throw InvalidInput("STIRAP delay exceeds the sequence duration");
}

void SequenceContext::validate() const {
    params.validate();
    base.validate();
    stirap.validate();
    if (!(rabi > 0.0)) throw InvalidInput("rabi must be positive");
    if (!(echo_sigma > 0.0)) throw InvalidInput("echo_sigma must be positive");
    if (!(tol > 0.0 && tol <= 1e-3)) throw InvalidInput("tol must lie in (0, 1e-3]");
}

DriveSchedule build_stirap(const StirapParams& p, StirapOrdering ordering) {
    p.validate();
    const double early = 4.0 * p.sigma;
    const double late = early + p.delay;
    const bool ci = ordering == StirapOrdering::counterintuitive;
    DriveSchedule s;
    s.envelope_plus = PulseEnvelope::gaussian(p.peak_plus, ci ? early : late, p.sigma);
    s.envelope_minus = PulseEnvelope::gaussian(p.peak_minus, ci ? late : early, p.sigma);
    s.delta_plus = p.delta_plus;
    s.delta_minus = p.delta_minus;
    s.duration = p.total_duration();
    return s;
}

DriveSchedule build_half_stirap(const StirapParams& p, StirapHalf half, StirapOrdering ordering) {
    DriveSchedule s = build_stirap(p, ordering);
    s.duration = 0.5 * p.total_duration();
    if (half == StirapHalf::second) s.time_offset = s.duration;
    return s;
}

Eigen::Matrix3cd pair_rotation(Level a, Level b, double angle, double axis_phase) {
    if (a == b) throw InvalidInput("rotation needs two distinct levels");
    Eigen::Matrix3cd u = Eigen::Matrix3cd::Identity();
    const auto i = static_cast<Eigen::Index>(slot(a));
    const auto j = static_cast<Eigen::Index>(slot(b));
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    u(i, i) = c;
    u(j, j) = c;
    u(i, j) = cplx(0.0, -s) * std::polar(1.0, -axis_phase);
    u(j, i) = cplx(0.0, -s) * std::polar(1.0, axis_phase);
    return u;
}

ShotConditions reference_shot(const SequenceContext& ctx) { return {ctx.params, ctx.base}; }

std::array<double, 3> environment_level_shifts(const SequenceContext& ctx, const ShotConditions& shot) {
    const LevelDiagram ref = level_energies(ctx.params, ctx.base);
    const LevelDiagram cur = level_energies(shot.params, shot.env);
    std::array<double, 3> shifts{};
    for (Level l : kLevels)
        shifts[slot(l)] = cur.difference(l, Level::zero) - ref.difference(l, Level::zero);
    return shifts;
}

// --- Ramsey ---------------------------------------------------------------

void RamseyParams::validate() const {
    if (variant != Variant::ramsey_01 && variant != Variant::ramsey_pm1)
        throw InvalidInput("run_ramsey needs the ramsey_01 or ramsey_pm1 variant");
    if (!(free_time >= 0.0) || !std::isfinite(free_time)) throw InvalidInput("free_time must be non-negative");
    if (!std::isfinite(field_offset) || !std::isfinite(detuning_offset) || !std::isfinite(readout_phase))
        throw InvalidInput("Ramsey offsets must be finite");
}

ShotOutcome run_ramsey(const SequenceContext& ctx, const RamseyParams& p, const ShotConditions& shot) {
    ctx.validate();
    p.validate();
    const SensingPair pair = sensing_pair(p.variant);
    ShotConditions cond = shot;
    cond.env.b_z += p.field_offset;
    const LevelDiagram ref = level_energies(ctx.params, ctx.base);
    const LevelDiagram cur = level_energies(cond.params, cond.env);
    const auto shifts = environment_level_shifts(ctx, cond);

    Stage st = open_superposition(ctx, p.variant, shifts);
    double phase = 0.0;
    st.psi = free_factors(ref, cur, pair.start, pair.other, p.detuning_offset, p.free_time, &phase)
                 .cwiseProduct(st.psi);
    const auto [close, close_time] = closing_unitary(ctx, p.variant, p.readout_phase, shifts);
    st.psi = close * st.psi;

    ShotOutcome out = finish(populations_of(st.psi), p.variant, st.duration + p.free_time + close_time);
    out.accumulated_phase = phase;
    return out;
}

ShotOutcome run_ramsey(const SequenceContext& ctx, const RamseyParams& p, const NoiseModel& noise,
                       std::uint64_t rng_seed) {
    noise.validate();
    Rng rng = make_stream(rng_seed, "ramsey");
    return run_ramsey(ctx, p, draw_shot(noise, ctx.params, ctx.base, rng));
}

// --- pulsed ODMR ----------------------------------------------------------

Populations odmr_populations(const SequenceContext& ctx, double pi_duration, double detuning,
                             const ShotConditions& shot) {
    if (!(pi_duration > 0.0)) throw InvalidInput("pi_duration must be positive");
    const double amplitude = 1.0 / (4.0 * pi_duration);
    DriveSchedule s;
    s.envelope_minus = PulseEnvelope::constant(amplitude, 0.0, std::nextafter(pi_duration, 2.0 * pi_duration));
    s.duration = pi_duration;
    s.level_shifts = environment_level_shifts(ctx, shot);
    s.level_shifts[slot(Level::minus)] -= detuning;
    return evolve(s, SpinState::basis_state(Level::zero), ctx.tol).populations();
}

Spectrum run_odmr_sweep(const SequenceContext& ctx, double pi_duration, std::span<const double> detuning_grid,
                        const NoiseModel& noise, const ReadoutParams& readout, std::size_t shots_per_point,
                        std::uint64_t rng_seed, unsigned threads) {
    ctx.validate();
    noise.validate();
    readout.validate();
    if (detuning_grid.empty()) throw InvalidInput("detuning grid must be non-empty");
    if (!std::is_sorted(detuning_grid.begin(), detuning_grid.end())) throw InvalidInput("detuning grid must be sorted");
    if (shots_per_point < 1) throw InvalidInput("shots_per_point must be at least 1");

    Spectrum out{{detuning_grid.begin(), detuning_grid.end()}, std::vector<double>(detuning_grid.size())};
    parallel_for(detuning_grid.size(), threads, [&](std::size_t j) {
        std::uint64_t total = 0;
        for (std::size_t s = 0; s < shots_per_point; ++s) {
            Rng rng = make_stream(rng_seed, "odmr", j * shots_per_point + s);
            const ShotConditions shot = draw_shot(noise, ctx.params, ctx.base, rng);
            const Populations pops = odmr_populations(ctx, pi_duration, detuning_grid[j], shot);
            total += sample_counts(expected_counts(pops, readout), rng);
        }
        out.counts[j] = static_cast<double>(total) / static_cast<double>(shots_per_point);
    });
    return out;
}

// --- CPMG -----------------------------------------------------------------

void CpmgParams::validate() const {
    if (variant != Variant::cpmg_ac_01 && variant != Variant::cpmg_ac_pm1)
        throw InvalidInput("run_cpmg_ac needs the cpmg_ac_01 or cpmg_ac_pm1 variant");
    if (!(period > 0.0) || !std::isfinite(period)) throw InvalidInput("AC period must be positive");
    if (echoes < 1) throw InvalidInput("CPMG needs at least one echo");
    if (echoes % 2 == 0)
        throw InvalidInput("echo placement with an even echo count leaves a static detuning unrefocused");
    if (!std::isfinite(ac_amplitude) || !std::isfinite(phase) || !std::isfinite(field_offset))
        throw InvalidInput("CPMG field parameters must be finite");
}

double cpmg_field_integral(const CpmgParams& p) {
    p.validate();
    const double omega = kTwoPi / p.period;
    const double half = 0.5 * p.period;
    double total = 0.0;
    for (int k = 0; k <= p.echoes; ++k) {
        const double t0 = k * half;
        const double t1 = t0 + half;
        const double segment = (std::cos(omega * t0 + p.phase) - std::cos(omega * t1 + p.phase)) / omega;
        total += (k % 2 == 0 ? 1.0 : -1.0) * segment;
    }
    return p.ac_amplitude * total;
}

ShotOutcome run_cpmg_ac(const SequenceContext& ctx, const CpmgParams& p, const NoiseModel& noise,
                        const ShotConditions& shot) {
    ctx.validate();
    p.validate();
    noise.validate();
    const SensingPair pair = sensing_pair(p.variant);
    ShotConditions cond = shot;
    cond.env.b_z += p.field_offset;
    const LevelDiagram ref = level_energies(ctx.params, ctx.base);
    const LevelDiagram cur = level_energies(cond.params, cond.env);
    const auto shifts = environment_level_shifts(ctx, cond);
    const double slope = pair_field_slope(ctx, pair);

    Stage st = open_superposition(ctx, p.variant, shifts);
    const auto [echo, echo_time] = echo_unitary(ctx, p.variant, shifts);
    const double omega = kTwoPi / p.period;
    const double half = 0.5 * p.period;
    for (int k = 0; k <= p.echoes; ++k) {
        const double t0 = k * half;
        const double t1 = t0 + half;
        const double field_area = p.ac_amplitude *
                                  (std::cos(omega * t0 + p.phase) - std::cos(omega * t1 + p.phase)) / omega;
        Eigen::Vector3cd f = free_factors(ref, cur, pair.start, pair.other, 0.0, half);
        f(static_cast<Eigen::Index>(slot(pair.other))) *= std::polar(1.0, -kTwoPi * slope * field_area);
        st.psi = f.cwiseProduct(st.psi);
        if (k < p.echoes) st.psi = echo * st.psi;
    }

    const double coherence = coherence_envelope(p.evolution_time(), noise.t2, noise.p_exponent);
    Eigen::Matrix3cd rho = coherence * (st.psi * st.psi.adjoint());
    for (Eigen::Index i = 0; i < 3; ++i) rho(i, i) += (1.0 - coherence) * std::norm(st.psi(i));
    const auto [close, close_time] = closing_unitary(ctx, p.variant, p.readout_phase, shifts);
    rho = close * rho * close.adjoint();

    ShotOutcome out = finish(populations_of(rho), p.variant,
                             st.duration + p.evolution_time() + p.echoes * echo_time + close_time);
    out.accumulated_phase = std::abs(slope) * kTwoPi * cpmg_field_integral(p);
    return out;
}

ShotOutcome run_cpmg_ac(const SequenceContext& ctx, const CpmgParams& p, const NoiseModel& noise,
                        const ReadoutParams& readout, std::uint64_t rng_seed) {
    readout.validate();
    Rng rng = make_stream(rng_seed, "cpmg");
    ShotOutcome out = run_cpmg_ac(ctx, p, noise, draw_shot(noise, ctx.params, ctx.base, rng));
    out.mean_counts = expected_counts(out.readout_population, readout);
    out.counts = sample_counts(*out.mean_counts, rng);
    return out;
}

// --- two-tone and custom waveforms ----------------------------------------

void TwoToneParams::validate() const {
    if (!(duration > 0.0)) throw InvalidInput("two-tone duration must be positive");
    if (!(raman_detuning != 0.0) || !std::isfinite(raman_detuning))
        throw InvalidInput("two-tone transfer needs a non-zero Raman detuning");
    if (!(amplitude >= 0.0)) throw InvalidInput("two-tone amplitude must be non-negative");
}

double two_tone_transfer_amplitude(double duration, double raman_detuning) {
    if (!(duration > 0.0)) throw InvalidInput("duration must be positive");
    return std::sqrt(std::abs(raman_detuning) / (2.0 * duration));
}

double raman_detuning_for(double duration, double nominal) {
    if (!(duration > 0.0)) throw InvalidInput("duration must be positive");
    return std::max(std::abs(nominal), 200.0 / duration);
}

DriveSchedule build_two_tone(const TwoToneParams& p) {
    p.validate();
    const double amplitude = p.amplitude > 0.0 ? p.amplitude : two_tone_transfer_amplitude(p.duration, p.raman_detuning);
    const double stop = std::nextafter(p.duration, 2.0 * p.duration);
    DriveSchedule s;
    s.envelope_plus = PulseEnvelope::constant(amplitude, 0.0, stop);
    s.envelope_minus = PulseEnvelope::constant(amplitude, 0.0, stop);
    s.delta_plus = p.raman_detuning;
    s.delta_minus = p.raman_detuning - 0.5 * p.two_photon_offset;
    s.duration = p.duration;
    return s;
}

ShotOutcome run_two_tone_transfer(const SequenceContext& ctx, const TwoToneParams& p, const ShotConditions& shot) {
    ctx.validate();
    DriveSchedule s = build_two_tone(p);
    ShotConditions cond = shot;
    cond.env.b_z += p.field_offset;
    s.level_shifts = environment_level_shifts(ctx, cond);
    const SpinState final_state = evolve(s, SpinState::basis_state(Level::minus), ctx.tol);
    return finish(final_state.populations(), Variant::continuous_two_tone, p.duration);
}

ShotOutcome run_custom_waveform(const SequenceContext& ctx, const WaveformGenome& genome,
                                const WaveformPlayback& playback, const ShotConditions& shot) {
    ctx.validate();
    DriveSchedule s = waveform_schedule(genome, playback.raman_detuning,
                                        playback.raman_detuning - 0.5 * playback.two_photon_offset);
    ShotConditions cond = shot;
    cond.env.b_z += playback.field_offset;
    s.level_shifts = environment_level_shifts(ctx, cond);
    const SpinState final_state = evolve(s, SpinState::basis_state(Level::minus), ctx.tol);
    return finish(final_state.populations(), Variant::custom_waveform, genome.duration);
}

Spectrum expected_spectrum(const SequenceContext& ctx, std::span<const double> grid, const NoiseModel& noise,
                           const ReadoutParams& readout, std::size_t draws, std::uint64_t seed, unsigned threads,
                           const ShotReadout& readout_fn) {
    ctx.validate();
    noise.validate();
    readout.validate();
    if (grid.empty()) throw InvalidInput("spectrum grid must be non-empty");
    if (draws < 1) throw InvalidInput("spectrum needs at least one noise draw");

    std::vector<ShotConditions> shots;
    if (noise.is_quiet()) {
        shots.push_back(reference_shot(ctx));
    } else {
        shots.reserve(draws);
        for (std::size_t d = 0; d < draws; ++d) {
            Rng rng = make_stream(seed, "spectrum.noise", d);
            shots.push_back(draw_shot(noise, ctx.params, ctx.base, rng));
        }
    }
    Spectrum out{{grid.begin(), grid.end()}, std::vector<double>(grid.size())};
    parallel_for(grid.size(), threads, [&](std::size_t j) {
        double sum = 0.0;
        for (const ShotConditions& shot : shots) sum += expected_counts(readout_fn(grid[j], shot), readout);
        out.counts[j] = sum / static_cast<double>(shots.size());
    });
    return out;
}

}  // namespace nvmag
