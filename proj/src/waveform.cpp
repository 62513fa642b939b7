#include "nvmag/waveform.hpp"

#include <cmath>

#include "nvmag/error.hpp"

namespace nvmag {

void WaveformGenome::validate() const {
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidInput("genome duration must be positive");
    if (!(amp_max > 0.0) || !std::isfinite(amp_max)) throw InvalidInput("genome amp_max must be positive");
    if (amp_plus.size() < 2 || amp_minus.size() != amp_plus.size())
        throw InvalidInput("genome needs at least two bins on both tones");
    for (const auto* amps : {&amp_plus, &amp_minus})
        for (double a : *amps)
            if (!(a >= 0.0 && a <= amp_max)) throw InvalidInput("genome amplitude outside [0, amp_max]");
    if (phase_plus.size() != phase_minus.size() || (!phase_plus.empty() && phase_plus.size() != bins()))
        throw InvalidInput("genome phases must be absent or one per bin on both tones");
}

WaveformGenome constant_genome(std::size_t bins, double duration, double amp_max, double amplitude) {
    WaveformGenome g;
    g.duration = duration;
    g.amp_max = amp_max;
    g.amp_plus.assign(bins, amplitude);
    g.amp_minus.assign(bins, amplitude);
    g.validate();
    return g;
}

DriveSchedule waveform_schedule(const WaveformGenome& genome, double delta_plus, double delta_minus) {
    genome.validate();
    std::vector<double> edges(genome.bins() + 1);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = genome.duration * static_cast<double>(i) / static_cast<double>(genome.bins());
    edges.back() = genome.duration;

    DriveSchedule s;
    s.envelope_plus = PulseEnvelope::piecewise(edges, genome.amp_plus, genome.phase_plus);
    s.envelope_minus = PulseEnvelope::piecewise(edges, genome.amp_minus, genome.phase_minus);
    // Closed last bin: the final instant still sees the drive.
    s.envelope_plus.edges.back() = std::nextafter(genome.duration, 2.0 * genome.duration);
    s.envelope_minus.edges.back() = s.envelope_plus.edges.back();
    s.delta_plus = delta_plus;
    s.delta_minus = delta_minus;
    s.duration = genome.duration;
    return s;
}

void to_json(nlohmann::json& j, const WaveformGenome& genome) {
    j = nlohmann::json{{"bins", genome.bins()},
                       {"duration", genome.duration},
                       {"amp_max", genome.amp_max},
                       {"amp_plus", genome.amp_plus},
                       {"amp_minus", genome.amp_minus}};
    if (genome.has_phases()) {
        j["phase_plus"] = genome.phase_plus;
        j["phase_minus"] = genome.phase_minus;
    }
}

void from_json(const nlohmann::json& j, WaveformGenome& genome) {
    genome.duration = j.at("duration").get<double>();
    genome.amp_max = j.at("amp_max").get<double>();
    genome.amp_plus = j.at("amp_plus").get<std::vector<double>>();
    genome.amp_minus = j.at("amp_minus").get<std::vector<double>>();
    genome.phase_plus = j.value("phase_plus", std::vector<double>{});
    genome.phase_minus = j.value("phase_minus", std::vector<double>{});
    if (j.contains("bins") && j.at("bins").get<std::size_t>() != genome.amp_plus.size())
        throw InvalidInput("genome bin count does not match amplitude arrays");
    genome.validate();
}

}  // namespace nvmag
