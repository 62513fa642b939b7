// sequences.hpp: the measurement protocols built from propagations, ideal
// rotations, quasi-static noise draws and readout.
//
// Free evolution is applied as exact phases from level_energies: each level
// picks up exp(-i 2 pi dE t), where dE is its energy shift (relative to the
// sequence's anchor level) against the noiseless reference environment the
// drives are tuned to.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nvmag/noise.hpp"
#include "nvmag/propagator.hpp"
#include "nvmag/readout.hpp"
#include "nvmag/spin_model.hpp"
#include "nvmag/waveform.hpp"

namespace nvmag {

enum class Variant {
    pulsed_odmr,
    ramsey_01,
    ramsey_pm1,
    stirap,
    half_stirap,
    cpmg_ac_01,
    cpmg_ac_pm1,
    continuous_two_tone,
    custom_waveform,
};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view text);

/// Sensing transition of a variant: the level the superposition starts from
/// and the level it is transferred to.
struct SensingPair {
    Level start;
    Level other;
};
SensingPair sensing_pair(Variant v);

/// 1 for {0,-1} protocols, 2 for {-1,+1} protocols.
int variant_delta_s(Variant v);

/// Level optically read out: |0> directly for {0,-1} protocols, |-1>
/// (mapped onto |0> by a resonant pi pulse) for the {-1,+1} protocols.
Level readout_level(Variant v);

enum class RotationMode { ideal, pulsed };

struct StirapParams {
    double peak_plus = 5e6;   ///< Hz
    double peak_minus = 5e6;  ///< Hz
    double sigma = 1e-6;      ///< s
    double delay = 1.2e-6;    ///< s, separation of the two pulse centers
    double delta_plus = 0.0;
    double delta_minus = 0.0;

    void validate() const;
    /// Both pulses covered to +-4 sigma.
    double total_duration() const { return 8.0 * sigma + delay; }
};

/// counterintuitive: Omega+ (coupling the target |+1>) precedes Omega-.
enum class StirapOrdering { counterintuitive, intuitive };
enum class StirapHalf { first, second };

struct SequenceContext {
    GroundStateParams params;
    /// Reference environment; drives are resonant with its transitions.
    EnvironmentFields base{0.0, 0.0, 3.0e7, 0.0, 0.0, 0.0};
    RotationMode rotations = RotationMode::ideal;
    double rabi = 5e6;        ///< Hz, square {0,-1} pulses in pulsed mode
    StirapParams stirap;      ///< half-STIRAP pi/2 pulses in pulsed mode
    double echo_sigma = 1e-7; ///< s, synchronous Gaussian echo pulses
    double tol = 1e-8;

    void validate() const;
};

struct ShotOutcome {
    Populations populations;
    double readout_population = 0.0;  ///< population mapped onto |0> at readout
    std::optional<double> accumulated_phase;  ///< rad
    double duration = 0.0;                    ///< s
    std::optional<double> mean_counts;
    std::optional<std::uint64_t> counts;
};

DriveSchedule build_stirap(const StirapParams& p,
                           StirapOrdering ordering = StirapOrdering::counterintuitive);

/// First or second half of build_stirap, split at the symmetry point.
DriveSchedule build_half_stirap(const StirapParams& p, StirapHalf half = StirapHalf::first,
                                StirapOrdering ordering = StirapOrdering::counterintuitive);

/// Ideal rotation by `angle` about the equatorial axis at `axis_phase` in the
/// (a, b) two-level subspace, canonical basis.
Eigen::Matrix3cd pair_rotation(Level a, Level b, double angle, double axis_phase);

/// Per-level shifts (Hz, canonical order) of a shot relative to the reference
/// environment, measured against |0>.
std::array<double, 3> environment_level_shifts(const SequenceContext& ctx, const ShotConditions& shot);

/// Noiseless reference conditions of a context.
ShotConditions reference_shot(const SequenceContext& ctx);

// --- Ramsey ---------------------------------------------------------------

struct RamseyParams {
    Variant variant = Variant::ramsey_pm1;
    double free_time = 0.0;        ///< s
    double field_offset = 0.0;     ///< nT, added to the axial field
    double detuning_offset = 0.0;  ///< Hz, frame detuning of the sensing pair
    double readout_phase = 0.0;    ///< rad, axis of the closing pi/2 (ideal and square pulses)

    void validate() const;
};

ShotOutcome run_ramsey(const SequenceContext& ctx, const RamseyParams& p, const ShotConditions& shot);
ShotOutcome run_ramsey(const SequenceContext& ctx, const RamseyParams& p, const NoiseModel& noise,
                       std::uint64_t rng_seed);

// --- pulsed ODMR ----------------------------------------------------------

struct Spectrum {
    std::vector<double> detunings;  ///< Hz
    std::vector<double> counts;     ///< mean photons per sequence
};

/// Resonant-amplitude square pi pulse on {0,-1} at drive detuning `detuning`
/// (Hz, drive minus transition frequency). Returns final populations.
Populations odmr_populations(const SequenceContext& ctx, double pi_duration, double detuning,
                             const ShotConditions& shot);

Spectrum run_odmr_sweep(const SequenceContext& ctx, double pi_duration, std::span<const double> detuning_grid,
                        const NoiseModel& noise, const ReadoutParams& readout, std::size_t shots_per_point,
                        std::uint64_t rng_seed, unsigned threads = 1);

// --- CPMG AC magnetometry -------------------------------------------------

/// One pi pulse at every half period: echoes e span (e + 1) half periods.
/// Odd echo counts refocus a static detuning exactly; even counts are
/// rejected.
struct CpmgParams {
    Variant variant = Variant::cpmg_ac_pm1;
    double ac_amplitude = 0.0;  ///< nT
    double period = 1e-3;       ///< s
    double phase = 0.0;         ///< rad; field is A sin(2 pi t / period + phase)
    int echoes = 1;
    double field_offset = 0.0;  ///< nT, static
    double readout_phase = 0.0; ///< rad

    void validate() const;
    double evolution_time() const { return 0.5 * period * (echoes + 1); }
};

/// Integral of A sin(2 pi t/T + phase) s(t) dt over the echo train, nT s.
double cpmg_field_integral(const CpmgParams& p);

ShotOutcome run_cpmg_ac(const SequenceContext& ctx, const CpmgParams& p, const NoiseModel& noise,
                        const ShotConditions& shot);
ShotOutcome run_cpmg_ac(const SequenceContext& ctx, const CpmgParams& p, const NoiseModel& noise,
                        const ReadoutParams& readout, std::uint64_t rng_seed);

// --- two-tone transfer and custom waveforms --------------------------------

struct TwoToneParams {
    double duration = 1e-4;           ///< s
    double raman_detuning = 2e6;      ///< Hz, Delta+ = Delta-
    double amplitude = 0.0;           ///< Hz on both tones; 0 picks the pi-transfer value
    double two_photon_offset = 0.0;   ///< Hz, drive two-photon detuning
    double field_offset = 0.0;        ///< nT

    void validate() const;
};

/// Equal amplitude giving a full |-1> -> |+1> Raman transfer in `duration`:
/// Omega^2/(2 Delta) = 1/(4 duration).
double two_tone_transfer_amplitude(double duration, double raman_detuning);

/// max(nominal, 200/duration): keeps the transfer amplitude at least 20 times
/// below the one-photon detuning so |0> is only virtually populated.
double raman_detuning_for(double duration, double nominal);

DriveSchedule build_two_tone(const TwoToneParams& p);

/// Starts in |-1> (ideal pi pulse right after initialization).
ShotOutcome run_two_tone_transfer(const SequenceContext& ctx, const TwoToneParams& p, const ShotConditions& shot);

struct WaveformPlayback {
    double raman_detuning = 2e6;     ///< Hz, Delta+ = Delta-
    double two_photon_offset = 0.0;  ///< Hz
    double field_offset = 0.0;       ///< nT
};

/// Plays an optimizer genome from |-1>.
ShotOutcome run_custom_waveform(const SequenceContext& ctx, const WaveformGenome& genome,
                                const WaveformPlayback& playback, const ShotConditions& shot);

// --- noise-averaged spectra -----------------------------------------------

/// Readout population of one shot at one sweep value.
using ShotReadout = std::function<double(double sweep_value, const ShotConditions& shot)>;

/// Expected counts per sweep value, averaged over `draws` quasi-static noise
/// draws (the same draws at every sweep value). No Poisson noise.
Spectrum expected_spectrum(const SequenceContext& ctx, std::span<const double> grid, const NoiseModel& noise,
                           const ReadoutParams& readout, std::size_t draws, std::uint64_t seed, unsigned threads,
                           const ShotReadout& readout_fn);

}  // namespace nvmag
