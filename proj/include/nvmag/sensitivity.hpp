// sensitivity.hpp: DC (spectrum gradient) and AC (echo) minimum detectable
// field, and sensitivity-vs-duration curves. All results in nT/sqrt(Hz).

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvmag/noise.hpp"
#include "nvmag/readout.hpp"
#include "nvmag/sequences.hpp"

namespace nvmag {

struct SensitivityReport {
    std::string method;       ///< "dc" or "ac"
    double min_field = 0.0;   ///< nT/sqrt(Hz); +inf when there is no slope
    double operating_point = 0.0;  ///< Hz detuning (dc) or s evolution time (ac)
    double tau = 0.0;         ///< s
    double n_photons = 0.0;
    int delta_s = 1;
    std::optional<double> g_max;  ///< counts per nT (dc)
    std::optional<double> c0;
    std::optional<double> t2;
    std::optional<double> p;
};

void to_json(nlohmann::json& j, const SensitivityReport& r);

struct GradientResult {
    double g_max = 0.0;           ///< |d counts / d B|, counts per nT
    double operating_detuning = 0.0;  ///< Hz
    double counts_at_operating = 0.0;
};

/// Converts the detuning axis to field with slope delta_s * gyromag (Hz/nT)
/// and returns the largest finite-difference gradient magnitude (central
/// differences inside, one-sided at the ends).
GradientResult max_gradient(const Spectrum& spectrum, int delta_s, double gyromag);

/// sqrt(tau / n) / g_max. Returns +inf when g_max <= 0.
double dc_sensitivity(double tau_dc, double n_photons, double g_max);

/// sqrt(1/(n tau)) / (2 c0 exp(-(tau/t2)^p) delta_s gyromag).
double ac_sensitivity(double n_photons, double tau_ac, double c0, double t2, double p, int delta_s,
                      double gyromag);

enum class SequenceFamily { pulsed_odmr, continuous_two_tone, optimized };

std::string_view to_string(SequenceFamily f);
std::optional<SequenceFamily> parse_family(std::string_view text);

struct CurveOptions {
    std::size_t grid_points = 241;
    double span = 6.0;        ///< sweep half-width in units of 1/duration
    std::size_t draws = 200;  ///< quasi-static noise draws per spectrum
    double overhead = 0.0;    ///< s added to every sequence duration
    double raman_detuning = 2e6;  ///< nominal; raised by raman_detuning_for at short durations
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// Supplies the waveform for the optimized family at a given duration.
    std::function<WaveformGenome(double duration)> genome_for;
};

/// One dc report per duration. The gradient is normalized by the counts at
/// the operating point, so the report's n_photons is that count.
std::vector<SensitivityReport> sensitivity_vs_duration(SequenceFamily family, const std::vector<double>& durations,
                                                       const SequenceContext& ctx, const NoiseModel& noise,
                                                       const ReadoutParams& readout, const CurveOptions& options);

/// Monte Carlo AC minimum detectable field of a single-echo sequence of
/// length tau: exact fringe slope at mid-fringe and the empirical standard
/// deviation of `shots` Poisson readouts there.
SensitivityReport monte_carlo_ac_sensitivity(const SequenceContext& ctx, Variant variant, double tau,
                                             const NoiseModel& noise, const ReadoutParams& readout,
                                             std::size_t shots, std::uint64_t seed);

}  // namespace nvmag
