#include "nvmag/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvmag/error.hpp"

namespace nvmag {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Round-off floor of one 3x3 exponential step.
constexpr double kErrorFloor = 1e-14;

std::vector<double> sample_times(double duration, std::size_t count) {
    if (count == 1) return {duration};
    std::vector<double> times(count);
    for (std::size_t i = 0; i < count; ++i)
        times[i] = duration * static_cast<double>(i) / static_cast<double>(count - 1);
    times.back() = duration;
    return times;
}

// Fourth-order Magnus step from two Gauss-Legendre samples. The commutator
// correction vanishes when H is constant over the step.
Eigen::Matrix3cd magnus_step(const HamiltonianFn& hamiltonian, double t, double dt) {
    constexpr double kOffset = 0.28867513459481287;  // sqrt(3)/6
    const Eigen::Matrix3cd h1 = hamiltonian(t + (0.5 - kOffset) * dt);
    const Eigen::Matrix3cd h2 = hamiltonian(t + (0.5 + kOffset) * dt);
    const Eigen::Matrix3cd comm = h2 * h1 - h1 * h2;
    const cplx k(0.0, -std::numbers::sqrt3 * std::numbers::pi * dt / 6.0);
    Eigen::Matrix3cd eff = 0.5 * (h1 + h2) + k * comm;
    eff = 0.5 * (eff + eff.adjoint()).eval();
    return step_unitary(eff, dt);
}

}  // namespace

PulseEnvelope PulseEnvelope::constant(double amplitude, double start, double stop) {
    PulseEnvelope e;
    e.kind = EnvelopeKind::constant;
    e.amplitude = amplitude;
    e.window_start = start;
    e.window_stop = stop;
    return e;
}

PulseEnvelope PulseEnvelope::gaussian(double amplitude, double center, double sigma) {
    PulseEnvelope e;
    e.kind = EnvelopeKind::gaussian;
    e.amplitude = amplitude;
    e.center = center;
    e.sigma = sigma;
    return e;
}

PulseEnvelope PulseEnvelope::piecewise(std::vector<double> edges, std::vector<double> amplitudes,
                                       std::vector<double> phases) {
    PulseEnvelope e;
    e.kind = EnvelopeKind::piecewise_constant;
    e.edges = std::move(edges);
    e.bin_amplitudes = std::move(amplitudes);
    e.bin_phases = std::move(phases);
    return e;
}

void PulseEnvelope::validate() const {
    switch (kind) {
        case EnvelopeKind::constant:
            if (!std::isfinite(amplitude)) throw InvalidInput("envelope amplitude must be finite");
            if (!(window_stop > window_start)) throw InvalidInput("constant envelope window is empty");
            break;
        case EnvelopeKind::gaussian:
            if (!std::isfinite(amplitude) || !std::isfinite(center))
                throw InvalidInput("gaussian envelope parameters must be finite");
            if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("gaussian width must be positive");
            break;
        case EnvelopeKind::piecewise_constant:
            if (edges.size() < 2 || bin_amplitudes.size() + 1 != edges.size())
                throw InvalidInput("piecewise envelope needs one amplitude per bin");
            if (!bin_phases.empty() && bin_phases.size() != bin_amplitudes.size())
                throw InvalidInput("piecewise envelope phases must match bins");
            for (std::size_t i = 1; i < edges.size(); ++i)
                if (!(edges[i] > edges[i - 1])) throw InvalidInput("bin edges must be strictly increasing");
            for (double a : bin_amplitudes)
                if (!std::isfinite(a)) throw InvalidInput("bin amplitudes must be finite");
            for (double p : bin_phases)
                if (!std::isfinite(p)) throw InvalidInput("bin phases must be finite");
            break;
    }
}

std::vector<double> PulseEnvelope::discontinuities() const {
    switch (kind) {
        case EnvelopeKind::constant: {
            std::vector<double> out{window_start};
            if (std::isfinite(window_stop)) out.push_back(window_stop);
            return out;
        }
        case EnvelopeKind::gaussian: return {};
        case EnvelopeKind::piecewise_constant: return edges;
    }
    return {};
}

namespace {

std::ptrdiff_t bin_index(const PulseEnvelope& env, double t) {
    if (t < env.edges.front() || t >= env.edges.back()) return -1;
    const auto it = std::upper_bound(env.edges.begin(), env.edges.end(), t);
    return (it - env.edges.begin()) - 1;
}

}  // namespace

double evaluate_envelope(const PulseEnvelope& env, double t) {
    switch (env.kind) {
        case EnvelopeKind::constant:
            return (t >= env.window_start && t <= env.window_stop) ? env.amplitude : 0.0;
        case EnvelopeKind::gaussian: {
            const double u = (t - env.center) / env.sigma;
            return env.amplitude * std::exp(-0.5 * u * u);
        }
        case EnvelopeKind::piecewise_constant: {
            const auto i = bin_index(env, t);
            return i < 0 ? 0.0 : env.bin_amplitudes[static_cast<std::size_t>(i)];
        }
    }
    return 0.0;
}

double envelope_phase(const PulseEnvelope& env, double t) {
    if (env.kind != EnvelopeKind::piecewise_constant || env.bin_phases.empty()) return 0.0;
    const auto i = bin_index(env, t);
    return i < 0 ? 0.0 : env.bin_phases[static_cast<std::size_t>(i)];
}

void DriveSchedule::validate() const {
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidInput("schedule duration must be positive");
    if (!std::isfinite(delta_plus) || !std::isfinite(delta_minus) || !std::isfinite(time_offset))
        throw InvalidInput("schedule detunings must be finite");
    for (double s : level_shifts)
        if (!std::isfinite(s)) throw InvalidInput("level shifts must be finite");
    envelope_plus.validate();
    envelope_minus.validate();
}

DriveParams DriveSchedule::drive_at(double t) const {
    const double te = t + time_offset;
    DriveParams d;
    d.omega_plus = evaluate_envelope(envelope_plus, te);
    d.omega_minus = evaluate_envelope(envelope_minus, te);
    d.phase_plus = envelope_phase(envelope_plus, te);
    d.phase_minus = envelope_phase(envelope_minus, te);
    d.delta_plus = delta_plus;
    d.delta_minus = delta_minus;
    // Signed piecewise amplitudes carry their sign as a phase of pi.
    if (d.omega_plus < 0.0) {
        d.omega_plus = -d.omega_plus;
        d.phase_plus += std::numbers::pi;
    }
    if (d.omega_minus < 0.0) {
        d.omega_minus = -d.omega_minus;
        d.phase_minus += std::numbers::pi;
    }
    return d;
}

BasisMatrix DriveSchedule::hamiltonian_at(double t) const {
    BasisMatrix h = rotating_hamiltonian(drive_at(t));
    for (Level l : kLevels) {
        const auto i = static_cast<Eigen::Index>(index_of(Basis::rotating, l));
        h.matrix(i, i) += level_shifts[slot(l)];
    }
    return h;
}

std::vector<double> DriveSchedule::breakpoints() const {
    std::vector<double> out;
    for (const PulseEnvelope* env : {&envelope_plus, &envelope_minus})
        for (double edge : env->discontinuities()) {
            const double t = edge - time_offset;
            if (t > 0.0 && t < duration) out.push_back(t);
        }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::array<double, 3> field_level_shifts(double delta_bz, const GroundStateParams& params) {
    std::array<double, 3> shifts{};
    shifts[slot(Level::plus)] = params.gyromag * delta_bz;
    shifts[slot(Level::minus)] = -params.gyromag * delta_bz;
    return shifts;
}

Eigen::Matrix3cd step_unitary(const Eigen::Matrix3cd& h, double dt) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> solver(h);
    const Eigen::Vector3d& w = solver.eigenvalues();
    Eigen::Vector3cd phases;
    for (Eigen::Index i = 0; i < 3; ++i) phases(i) = std::polar(1.0, -kTwoPi * w(i) * dt);
    const Eigen::Matrix3cd& v = solver.eigenvectors();
    return v * phases.asDiagonal() * v.adjoint();
}

PropagationResult propagate(const HamiltonianFn& hamiltonian, double duration,
                            std::span<const double> breakpoints, const SpinState& initial,
                            const PropagationOptions& options) {
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidInput("duration must be positive");
    if (!(options.tol > 0.0) || options.tol > 1e-3) throw InvalidInput("tol must lie in (0, 1e-3]");
    if (options.sample_count == 0) throw InvalidInput("sample_count must be positive");
    if (options.fixed_step && !(*options.fixed_step > 0.0)) throw InvalidInput("fixed step must be positive");

    const std::vector<double> samples = sample_times(duration, options.sample_count);
    std::vector<double> stops(samples.begin(), samples.end());
    for (double b : breakpoints)
        if (b > 0.0 && b < duration) stops.push_back(b);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    PropagationResult result{{}, {}, initial};
    result.times.reserve(samples.size());
    result.states.reserve(samples.size());

    Eigen::Vector3cd psi = initial.in_basis(Basis::rotating);
    auto record = [&](double t) {
        result.times.push_back(t);
        result.states.push_back(SpinState::from_basis(Basis::rotating, psi / psi.norm()));
    };

    std::size_t next_sample = 0;
    if (samples.front() == 0.0) {
        record(0.0);
        next_sample = 1;
    }

    double t = 0.0;
    double h = options.fixed_step.value_or(duration);
    for (double stop : stops) {
        if (stop <= 0.0) continue;
        while (t < stop) {
            const double remaining = stop - t;
            if (options.fixed_step) {
                const double dt = std::min(*options.fixed_step, remaining);
                psi = magnus_step(hamiltonian, t, dt) * psi;
                t = (dt == remaining) ? stop : t + dt;
                continue;
            }
            const double dt = std::min(h, remaining);
            const Eigen::Vector3cd full = magnus_step(hamiltonian, t, dt) * psi;
            const Eigen::Vector3cd first = magnus_step(hamiltonian, t, 0.5 * dt) * psi;
            const Eigen::Vector3cd fine = magnus_step(hamiltonian, t + 0.5 * dt, 0.5 * dt) * first;
            const double err = (full - fine).norm();
            const double allowed = std::max(options.tol * dt / duration, kErrorFloor);
            if (err <= allowed) {
                psi = fine;
                t = (dt == remaining) ? stop : t + dt;
                const double grow = err > 0.0 ? 0.9 * std::pow(allowed / err, 0.2) : 4.0;
                h = dt * std::clamp(grow, 0.2, 4.0);
            } else {
                h = dt * std::clamp(0.9 * std::pow(allowed / err, 0.2), 0.1, 0.9);
                if (h < options.min_step)
                    throw StiffnessError("propagation step fell below the minimum step size");
            }
        }
        if (next_sample < samples.size() && stop == samples[next_sample]) {
            record(stop);
            ++next_sample;
        }
    }
    result.final_state = SpinState::from_basis(Basis::rotating, psi / psi.norm());
    return result;
}

PropagationResult propagate(const DriveSchedule& schedule, const SpinState& initial,
                            std::size_t sample_count, double tol) {
    schedule.validate();
    const std::vector<double> bps = schedule.breakpoints();
    PropagationOptions options;
    options.tol = tol;
    options.sample_count = sample_count;
    return propagate([&](double t) { return schedule.hamiltonian_at(t).matrix; }, schedule.duration, bps,
                     initial, options);
}

SpinState evolve(const DriveSchedule& schedule, const SpinState& initial, double tol) {
    return propagate(schedule, initial, 1, tol).final_state;
}

}  // namespace nvmag
