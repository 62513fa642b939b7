// propagator.hpp: time-dependent Schroedinger integration for the two-tone
// rotating-frame Hamiltonian.
//
// Solves i d(psi)/dt = 2*pi * H(t) * psi with H in Hz. Each step is a
// fourth-order Magnus exponential built from two samples of H; the step size
// adapts on a step-doubling error estimate. Stepping never crosses an envelope
// discontinuity or a requested sample instant, so piecewise-constant drives
// are integrated exactly.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nvmag/spin_model.hpp"

namespace nvmag {

enum class EnvelopeKind { constant, gaussian, piecewise_constant };

struct PulseEnvelope {
    EnvelopeKind kind = EnvelopeKind::constant;
    double amplitude = 0.0;  ///< Hz; constant level or Gaussian peak
    double window_start = 0.0;
    double window_stop = std::numeric_limits<double>::infinity();
    double center = 0.0;  ///< s
    double sigma = 1.0;   ///< s
    std::vector<double> edges;           ///< s, strictly increasing
    std::vector<double> bin_amplitudes;  ///< Hz, one per bin
    std::vector<double> bin_phases;      ///< rad, empty or one per bin

    /// Amplitude on [start, stop], zero elsewhere.
    static PulseEnvelope constant(double amplitude, double start = 0.0,
                                  double stop = std::numeric_limits<double>::infinity());
    static PulseEnvelope gaussian(double amplitude, double center, double sigma);
    static PulseEnvelope piecewise(std::vector<double> edges, std::vector<double> amplitudes,
                                   std::vector<double> phases = {});
    static PulseEnvelope off() { return constant(0.0); }

    void validate() const;
    /// Instants where the envelope may jump.
    std::vector<double> discontinuities() const;
};

double evaluate_envelope(const PulseEnvelope& env, double t);
double envelope_phase(const PulseEnvelope& env, double t);

struct DriveSchedule {
    PulseEnvelope envelope_plus = PulseEnvelope::off();
    PulseEnvelope envelope_minus = PulseEnvelope::off();
    double delta_plus = 0.0;   ///< Hz
    double delta_minus = 0.0;  ///< Hz
    double duration = 0.0;     ///< s
    /// Envelopes are read at (t + time_offset); lets a schedule be a window
    /// of a longer pulse pair.
    double time_offset = 0.0;
    /// Extra diagonal energies (Hz, canonical level order) from environment
    /// shifts or field offsets relative to the drive frame.
    std::array<double, 3> level_shifts{};

    void validate() const;
    DriveParams drive_at(double t) const;
    BasisMatrix hamiltonian_at(double t) const;
    /// Envelope jump instants strictly inside (0, duration).
    std::vector<double> breakpoints() const;
};

/// Level shifts that place an axial field offset into the rotating frame:
/// |+1> up and |-1> down by g*dBz, so the |-1> diagonal moves by -2 g dBz
/// relative to |+1>, exactly as in two_photon_detuning.
std::array<double, 3> field_level_shifts(double delta_bz, const GroundStateParams& params);

struct PropagationResult {
    std::vector<double> times;
    std::vector<SpinState> states;
    SpinState final_state;
};

struct PropagationOptions {
    double tol = 1e-8;
    /// Number of uniformly spaced samples over [0, duration], endpoints
    /// included. A value of 1 records only the final state.
    std::size_t sample_count = 2;
    /// Disables adaptivity when set (used for convergence studies).
    std::optional<double> fixed_step;
    double min_step = 1e-15;
};

using HamiltonianFn = std::function<Eigen::Matrix3cd(double)>;

/// exp(-i 2 pi h dt) for Hermitian h.
Eigen::Matrix3cd step_unitary(const Eigen::Matrix3cd& h, double dt);

/// Generic entry point: hamiltonian(t) must return H in Basis::rotating (Hz).
PropagationResult propagate(const HamiltonianFn& hamiltonian, double duration,
                            std::span<const double> breakpoints, const SpinState& initial,
                            const PropagationOptions& options);

PropagationResult propagate(const DriveSchedule& schedule, const SpinState& initial,
                            std::size_t sample_count = 2, double tol = 1e-8);

/// Final state only.
SpinState evolve(const DriveSchedule& schedule, const SpinState& initial, double tol = 1e-8);

}  // namespace nvmag
