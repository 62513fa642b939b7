// readout.hpp: fluorescence model and photon shot noise.

#pragma once

#include <cstdint>

#include "nvmag/rng.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

struct ReadoutParams {
    double bright_counts = 0.05;  ///< mean photons per readout from |0>
    double contrast_c0 = 0.3;     ///< fractional dimming of |+-1>
    double init_fidelity = 1.0;   ///< probability the shot started in |0>

    void validate() const;
};

/// bright * (P0 + (1 - P0)(1 - C0)). With init_fidelity f < 1 the |0>
/// population is first mixed with the bright baseline: P0 -> f P0 + (1 - f).
double expected_counts(const Populations& populations, const ReadoutParams& params);

/// Convenience for a population already mapped onto |0> at readout.
double expected_counts(double bright_population, const ReadoutParams& params);

/// Poisson draw with the given mean.
std::uint64_t sample_counts(double mean, Rng& rng);

}  // namespace nvmag
