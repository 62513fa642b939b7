// analysis.hpp: fringe calibration, Bayesian field estimation from photon
// counts, overlapping Allan deviation and simulated stability campaigns.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nvmag/noise.hpp"
#include "nvmag/readout.hpp"
#include "nvmag/sequences.hpp"

namespace nvmag {

/// Expected counts per shot as a function of the axial field offset (nT).
using FieldResponse = std::function<double(double field)>;

/// Monotone branch of a fringe, tabulated on a uniform field grid.
struct CalibrationCurve {
    std::vector<double> fields;  ///< nT, increasing
    std::vector<double> counts;  ///< expected counts per shot
    bool increasing = true;

    double lower() const { return fields.front(); }
    double upper() const { return fields.back(); }
    double width() const { return fields.back() - fields.front(); }
};

/// Samples `response` on [lo, hi], takes the steepest sample nearest zero
/// field, follows the curve both ways while it stays strictly monotone and
/// re-tabulates that branch on `points` uniform samples. Throws
/// CalibrationError for a flat curve.
CalibrationCurve calibrate(const FieldResponse& response, double lo, double hi, std::size_t search_points = 4096,
                           std::size_t points = 512);

struct FringeSetup {
    Variant variant = Variant::ramsey_pm1;
    double free_time = 2e-5;       ///< s, Ramsey free evolution or two-tone duration
    double readout_phase = 1.5707963267948966;  ///< rad; pi/2 puts zero field mid-fringe
    double raman_detuning = 2e6;   ///< Hz, continuous_two_tone only
};

/// Expected counts per shot of the setup at a field offset, averaged over
/// `draws` noise draws (one when the model is quiet).
FieldResponse fringe_response(const FringeSetup& setup, const SequenceContext& ctx, const NoiseModel& noise,
                              const ReadoutParams& readout, std::size_t draws = 1, std::uint64_t seed = 1);

/// Calibration for ramsey_01, ramsey_pm1 or continuous_two_tone. The search
/// spans one fringe period (Ramsey) or six linewidths (two-tone) each side.
CalibrationCurve calibrate_fringe(const FringeSetup& setup, const SequenceContext& ctx, const NoiseModel& noise,
                                  const ReadoutParams& readout, std::size_t draws = 1, std::uint64_t seed = 1);

struct FieldPosterior {
    std::vector<double> fields;   ///< nT
    std::vector<double> density;  ///< per nT, trapezoid-normalized
    double mean = 0.0;
    double lower = 0.0;  ///< 16th percentile
    double upper = 0.0;  ///< 84th percentile
    double map = 0.0;
    /// Maximum a posteriori sits on the branch boundary: the true field may
    /// lie outside the unambiguous range.
    bool at_edge = false;
};

/// Posterior over the branch for `counts` photons summed over `shots`
/// shots, Poisson likelihood and uniform prior. Throws OutOfRangeError when
/// the counts are impossible everywhere on the branch.
FieldPosterior estimate_field(std::uint64_t counts, std::size_t shots, const CalibrationCurve& cal);

struct AllanCurve {
    std::vector<double> taus;        ///< s
    std::vector<double> deviations;  ///< units of the series
    std::vector<std::size_t> sample_counts;  ///< number of averaged differences
    std::vector<std::string> notices;
};

/// Overlapping Allan deviation of a series sampled every `cadence` seconds.
/// Every tau must be a whole multiple of the cadence; taus longer than half
/// the series are dropped with a notice.
AllanCurve allan_deviation(const std::vector<double>& series, double cadence, const std::vector<double>& taus);

/// Cadence * m for m = 1, 2, 4, ... up to `max_fraction` of the series.
std::vector<double> octave_taus(std::size_t length, double cadence, double max_fraction = 0.5);

struct MeasurementRecord {
    Variant variant = Variant::ramsey_pm1;
    std::vector<double> timestamps;       ///< s, interval start
    std::vector<std::uint64_t> counts;    ///< photons summed over the interval
    std::size_t shots_per_interval = 0;
    std::vector<double> estimates;        ///< nT, posterior means
    std::vector<double> lower;            ///< nT
    std::vector<double> upper;            ///< nT
    std::vector<bool> flagged;            ///< estimate at the branch edge
    double calibration_lower = 0.0;
    double calibration_upper = 0.0;
};

struct StabilityConfig {
    FringeSetup setup;
    double total_duration = 1e4;  ///< s
    double cadence = 1.0;         ///< s
    std::size_t shots_per_interval = 100000;
    double field = 0.0;           ///< nT, constant measurand offset
    std::vector<DriftTrace> drifts;
    NoiseModel noise;
    ReadoutParams readout;
    std::vector<double> taus;     ///< empty: octaves up to 1/100 of the campaign
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t calibration_draws = 200;

    void validate() const;
};

struct StabilityResult {
    MeasurementRecord record;
    CalibrationCurve calibration;
    AllanCurve allan;
};

/// Calibrates at the drift-free reference, then per interval applies the
/// drifts, draws the summed photon count and estimates the field.
StabilityResult stability_experiment(const SequenceContext& ctx, const StabilityConfig& config);

/// One posterior per step of a time-varying field (Poisson counts summed over
/// `shots` per step).
std::vector<FieldPosterior> track_field(const CalibrationCurve& cal, const FieldResponse& response,
                                        const std::vector<double>& fields, std::size_t shots, std::uint64_t seed,
                                        unsigned threads = 1);

void write_record_csv(const std::filesystem::path& path, const MeasurementRecord& record);
void write_allan_csv(const std::filesystem::path& path, const AllanCurve& curve);
void write_posterior_csv(const std::filesystem::path& path, const FieldPosterior& posterior);

}  // namespace nvmag
