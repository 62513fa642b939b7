// waveform.hpp: piecewise-constant two-tone waveform genome.

#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "nvmag/propagator.hpp"

namespace nvmag {

/// K bins of (Omega+, Omega-) amplitudes in [0, amp_max] over a fixed
/// duration. Phases are optional; when empty the drives are real.
struct WaveformGenome {
    double duration = 0.0;  ///< s
    double amp_max = 0.0;   ///< Hz
    std::vector<double> amp_plus;
    std::vector<double> amp_minus;
    std::vector<double> phase_plus;
    std::vector<double> phase_minus;

    std::size_t bins() const { return amp_plus.size(); }
    bool has_phases() const { return !phase_plus.empty(); }
    void validate() const;
};

/// Every bin at the same amplitude on both tones.
WaveformGenome constant_genome(std::size_t bins, double duration, double amp_max, double amplitude);

/// Rotating-frame schedule with the given one-photon detunings.
DriveSchedule waveform_schedule(const WaveformGenome& genome, double delta_plus, double delta_minus);

void to_json(nlohmann::json& j, const WaveformGenome& genome);
void from_json(const nlohmann::json& j, WaveformGenome& genome);

}  // namespace nvmag
