#include "nvmag/readout.hpp"

#include <cmath>
#include <random>

#include "nvmag/error.hpp"

namespace nvmag {

void ReadoutParams::validate() const {
    if (!(bright_counts > 0.0) || !std::isfinite(bright_counts))
        throw InvalidInput("bright_counts must be positive");
    if (!(contrast_c0 > 0.0 && contrast_c0 < 1.0)) throw InvalidInput("contrast_c0 must lie in (0, 1)");
    if (!(init_fidelity > 0.0 && init_fidelity <= 1.0)) throw InvalidInput("init_fidelity must lie in (0, 1]");
}

double expected_counts(double bright_population, const ReadoutParams& params) {
    params.validate();
    if (!(bright_population >= -1e-12 && bright_population <= 1.0 + 1e-12))
        throw InvalidInput("population must lie in [0, 1]");
    const double p0 = params.init_fidelity * bright_population + (1.0 - params.init_fidelity);
    return params.bright_counts * (p0 + (1.0 - p0) * (1.0 - params.contrast_c0));
}

double expected_counts(const Populations& populations, const ReadoutParams& params) {
    return expected_counts(populations[Level::zero], params);
}

std::uint64_t sample_counts(double mean, Rng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidInput("count mean must be finite and non-negative");
    if (mean == 0.0) return 0;
    std::poisson_distribution<std::uint64_t> poisson(mean);
    return poisson(rng);
}

}  // namespace nvmag
