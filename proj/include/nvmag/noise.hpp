// noise.hpp: quasi-static environmental fluctuations, deterministic drifts,
// and the stretched-exponential echo envelope.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "nvmag/rng.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

/// Standard deviations of zero-mean Gaussian fluctuations, redrawn once per
/// shot, plus the (T2, p) echo envelope.
struct NoiseModel {
    double sigma_bz = 0.0;     ///< nT
    double sigma_bperp = 0.0;  ///< nT, total transverse magnitude scale
    double sigma_ez = 0.0;     ///< V/m
    double sigma_dg = 0.0;     ///< Hz
    double t2 = 2.36e-3;       ///< s
    double p_exponent = 2.0;

    void validate() const;
    bool is_quiet() const {
        return sigma_bz == 0.0 && sigma_bperp == 0.0 && sigma_ez == 0.0 && sigma_dg == 0.0;
    }
};

/// Constants and fields seen by a single shot.
struct ShotConditions {
    GroundStateParams params;
    EnvironmentFields env;
};

/// base + independent draws on b_z, (b_x, b_y) and e_z. The transverse draw
/// has per-axis std sigma_bperp/sqrt(2), so <Bx^2 + By^2> = sigma_bperp^2.
EnvironmentFields sample_environment(const NoiseModel& model, const EnvironmentFields& base, Rng& rng);

/// sample_environment followed by a zero-field-splitting draw.
ShotConditions draw_shot(const NoiseModel& model, const GroundStateParams& params,
                         const EnvironmentFields& base, Rng& rng);

/// exp(-(tau/t2)^p).
double coherence_envelope(double tau, double t2, double p);

/// Gaussian free-induction decay time sqrt(2)/(2 pi sigma_f) of the (a, b)
/// transition, with sigma_f estimated by Monte Carlo over draw_shot. Returns
/// +infinity when the transition does not fluctuate.
double t2star_of_sigma(const NoiseModel& model, const GroundStateParams& params,
                       const EnvironmentFields& base, Level a, Level b,
                       std::size_t draws = 10000, std::uint64_t seed = 1);

enum class DriftChannel { bz, dg };

/// Deterministic offsets (nT for bz, Hz for dg), linearly interpolated
/// between timestamps and held constant outside them.
struct DriftTrace {
    DriftChannel channel = DriftChannel::bz;
    std::vector<double> times;
    std::vector<double> offsets;

    void validate() const;
    double offset_at(double t) const;
};

/// Reads a two-column CSV (time_s, offset). A non-numeric first row is
/// treated as a header.
DriftTrace load_drift_csv(const std::filesystem::path& path, DriftChannel channel);

/// Applies every trace at time t.
void apply_drifts(const std::vector<DriftTrace>& drifts, double t, GroundStateParams& params,
                  EnvironmentFields& env);

}  // namespace nvmag
