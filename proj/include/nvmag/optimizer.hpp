// optimizer.hpp: genetic search over piecewise-constant two-tone waveforms
// for the largest field dependence of the final |-1> population.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "nvmag/sequences.hpp"
#include "nvmag/waveform.hpp"

namespace nvmag {

enum class Objective {
    slope,                ///< |dP(-1)/dB|, per nT
    slope_per_root_time,  ///< slope / sqrt(duration), tracks sensitivity
};

std::string_view to_string(Objective o);
std::optional<Objective> parse_objective(std::string_view text);

struct GaConfig {
    std::size_t population_size = 64;
    std::size_t generations = 100;
    std::size_t elite_count = 2;
    std::size_t tournament_size = 4;
    double mutation_std = 0.1;        ///< fraction of amp_max
    double gene_mutation_rate = 0.25; ///< probability that a given gene is perturbed
    double crossover_rate = 0.7;
    std::uint64_t seed = 1;
    double delta_b = 1.0;             ///< nT
    unsigned threads = 1;

    void validate() const;
};

struct FitnessContext {
    SequenceContext ctx;
    double raman_detuning = 2e6;  ///< Hz, Delta+ = Delta-
    double b0 = 0.0;              ///< nT, operating offset from ctx.base.b_z
    Objective objective = Objective::slope;
    double initial_phase = 0.0;   ///< rad, global phase of the prepared |-1>
};

/// Final |-1> population after playing the genome at axial offset `field`.
double minus_population(const WaveformGenome& genome, const FitnessContext& fc, double field);

/// |P(b0 + dB) - P(b0 - dB)| / (2 dB), optionally divided by sqrt(duration).
double fitness(const WaveformGenome& genome, const FitnessContext& fc, double delta_b);

/// Offset within +-span (nT) where the genome's fitness peaks, on a uniform
/// grid of `points`.
double steepest_field(const WaveformGenome& genome, const FitnessContext& fc, double span, std::size_t points,
                      double delta_b = 1.0);

struct GaResult {
    WaveformGenome best;
    double best_fitness = 0.0;
    /// Best fitness of the initial population, then after every generation.
    std::vector<double> history;
};

/// The template is a member of the initial population, so the result never
/// scores below it.
GaResult evolve(const GaConfig& config, const WaveformGenome& templ, const FitnessContext& fc);

}  // namespace nvmag
