#include "nvmag/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>

#include "nvmag/error.hpp"
#include "nvmag/parallel.hpp"

namespace nvmag {

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    if (n > 1) v.back() = hi;
    return v;
}

// Readout population of one shot of the setup at a field offset.
double setup_population(const FringeSetup& setup, const SequenceContext& ctx, double field,
                        const ShotConditions& shot) {
    switch (setup.variant) {
        case Variant::ramsey_01:
        case Variant::ramsey_pm1: {
            RamseyParams p;
            p.variant = setup.variant;
            p.free_time = setup.free_time;
            p.field_offset = field;
            p.readout_phase = setup.readout_phase;
            return run_ramsey(ctx, p, shot).readout_population;
        }
        case Variant::continuous_two_tone: {
            TwoToneParams p;
            p.duration = setup.free_time;
            p.raman_detuning = raman_detuning_for(setup.free_time, setup.raman_detuning);
            p.field_offset = field;
            return run_two_tone_transfer(ctx, p, shot).readout_population;
        }
        default:
            throw InvalidInput("fringe calibration supports ramsey_01, ramsey_pm1 and continuous_two_tone");
    }
}

std::vector<ShotConditions> noise_draws(const ShotConditions& base,
                                        const NoiseModel& noise, std::size_t draws, std::uint64_t seed,
                                        std::string_view purpose) {
    if (noise.is_quiet()) return {base};
    if (draws < 1) throw InvalidInput("at least one noise draw is needed");
    std::vector<ShotConditions> shots;
    shots.reserve(draws);
    for (std::size_t d = 0; d < draws; ++d) {
        Rng rng = make_stream(seed, purpose, d);
        shots.push_back(draw_shot(noise, base.params, base.env, rng));
    }
    return shots;
}

void write_line(std::ofstream& out, std::initializer_list<double> values) {
    char buf[32];
    bool first = true;
    for (double v : values) {
        if (!first) out << ',';
        first = false;
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    }
    out << '\n';
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

CalibrationCurve calibrate(const FieldResponse& response, double lo, double hi, std::size_t search_points,
                           std::size_t points) {
    if (!(hi > lo) || search_points < 3 || points < 2) throw InvalidInput("invalid calibration search range");
    const std::vector<double> b = linspace(lo, hi, search_points);
    std::vector<double> c(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) c[i] = response(b[i]);

    const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
    const double scale = std::max(std::abs(*mx), std::abs(*mn));
    if (!(*mx - *mn > 1e-9 * scale)) throw CalibrationError("calibration curve is flat: no monotone branch");

    // Steepest sample. Slopes within 1e-3 of each other count as ties (grid
    // offsets alone make equal flanks differ) and go to the one nearest zero.
    std::size_t steep = 1;
    double best = -1.0;
    for (std::size_t i = 1; i + 1 < b.size(); ++i) {
        const double g = std::abs(c[i + 1] - c[i - 1]);
        const bool tie = std::abs(g - best) <= 1e-3 * best;
        if ((g > best && !tie) || (tie && std::abs(b[i]) < std::abs(b[steep]))) {
            best = std::max(best, g);
            steep = i;
        }
    }
    const bool increasing = c[steep + 1] > c[steep - 1];
    auto rising = [&](std::size_t i) { return increasing ? c[i + 1] > c[i] : c[i + 1] < c[i]; };
    std::size_t left = steep, right = steep;
    while (left > 0 && rising(left - 1)) --left;
    while (right + 1 < b.size() && rising(right)) ++right;
    if (right - left < 2) throw CalibrationError("no monotone branch wider than the search resolution");

    CalibrationCurve cal;
    cal.increasing = increasing;
    cal.fields = linspace(b[left], b[right], points);
    cal.counts.resize(points);
    for (std::size_t i = 0; i < points; ++i) cal.counts[i] = response(cal.fields[i]);
    for (std::size_t i = 1; i < points; ++i) {
        const bool ok = increasing ? cal.counts[i] > cal.counts[i - 1] : cal.counts[i] < cal.counts[i - 1];
        if (!ok) throw CalibrationError("re-tabulated branch is not strictly monotone");
    }
    return cal;
}

FieldResponse fringe_response(const FringeSetup& setup, const SequenceContext& ctx, const NoiseModel& noise,
                              const ReadoutParams& readout, std::size_t draws, std::uint64_t seed) {
    ctx.validate();
    noise.validate();
    readout.validate();
    if (!(setup.free_time > 0.0)) throw InvalidInput("fringe free_time must be positive");
    auto shots = std::make_shared<std::vector<ShotConditions>>(
        noise_draws(reference_shot(ctx), noise, draws, seed, "calibration.noise"));
    return [setup, ctx, readout, shots](double field) {
        double sum = 0.0;
        for (const ShotConditions& s : *shots) sum += expected_counts(setup_population(setup, ctx, field, s), readout);
        return sum / static_cast<double>(shots->size());
    };
}

CalibrationCurve calibrate_fringe(const FringeSetup& setup, const SequenceContext& ctx, const NoiseModel& noise,
                                  const ReadoutParams& readout, std::size_t draws, std::uint64_t seed) {
    const FieldResponse response = fringe_response(setup, ctx, noise, readout, draws, seed);
    const double g = ctx.params.gyromag;
    double span = 0.0;
    if (setup.variant == Variant::continuous_two_tone) {
        span = 6.0 / (2.0 * g * setup.free_time);
    } else {
        span = 1.0 / (variant_delta_s(setup.variant) * g * setup.free_time);
    }
    return calibrate(response, -span, span);
}

FieldPosterior estimate_field(std::uint64_t counts, std::size_t shots, const CalibrationCurve& cal) {
    if (shots < 1) throw InvalidInput("shots must be at least 1");
    if (cal.fields.size() < 2 || cal.fields.size() != cal.counts.size()) throw InvalidInput("invalid calibration");
    const std::size_t n = cal.fields.size();
    const double k = static_cast<double>(counts);
    const double s = static_cast<double>(shots);

    std::vector<double> loglik(n);
    double peak = -std::numeric_limits<double>::infinity();
    std::size_t map = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = s * cal.counts[i];
        double ll;
        if (mu <= 0.0) {
            ll = k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
        } else {
            ll = k * std::log(mu) - mu;
        }
        loglik[i] = ll;
        if (ll > peak) {
            peak = ll;
            map = i;
        }
    }
    if (!std::isfinite(peak)) throw OutOfRangeError("observed counts are impossible everywhere on the branch");

    FieldPosterior post;
    post.fields = cal.fields;
    post.density.resize(n);
    for (std::size_t i = 0; i < n; ++i) post.density[i] = std::exp(loglik[i] - peak);
    double area = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        area += 0.5 * (post.density[i] + post.density[i - 1]) * (post.fields[i] - post.fields[i - 1]);
    for (double& d : post.density) d /= area;

    std::vector<double> cdf(n, 0.0);
    double mean = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double h = post.fields[i] - post.fields[i - 1];
        cdf[i] = cdf[i - 1] + 0.5 * (post.density[i] + post.density[i - 1]) * h;
        mean += 0.5 * (post.density[i] * post.fields[i] + post.density[i - 1] * post.fields[i - 1]) * h;
    }
    auto quantile = [&](double q) {
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
        if (it == cdf.begin()) return post.fields.front();
        if (it == cdf.end()) return post.fields.back();
        const std::size_t j = static_cast<std::size_t>(it - cdf.begin());
        const double f = (q - cdf[j - 1]) / (cdf[j] - cdf[j - 1]);
        return post.fields[j - 1] + f * (post.fields[j] - post.fields[j - 1]);
    };
    post.mean = mean;
    post.lower = quantile(0.16);
    post.upper = quantile(0.84);
    post.map = post.fields[map];
    post.at_edge = map == 0 || map + 1 == n;
    return post;
}

AllanCurve allan_deviation(const std::vector<double>& series, double cadence, const std::vector<double>& taus) {
    if (series.size() < 3) throw InvalidInput("Allan deviation needs at least 3 samples");
    if (!(cadence > 0.0)) throw InvalidInput("cadence must be positive");
    const std::size_t n = series.size();

    double offset = 0.0;
    for (double y : series) offset += y;
    offset /= static_cast<double>(n);
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (series[i] - offset);

    AllanCurve curve;
    for (double tau : taus) {
        const double ratio = tau / cadence;
        const double rounded = std::round(ratio);
        if (!(rounded >= 1.0) || std::abs(ratio - rounded) > 1e-9 * ratio)
            throw InvalidInput("every tau must be a positive multiple of the cadence");
        const auto m = static_cast<std::size_t>(rounded);
        if (2 * m > n) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "tau %.6g s omitted: longer than half the series", tau);
            curve.notices.emplace_back(buf);
            continue;
        }
        const std::size_t terms = n - 2 * m + 1;
        const double md = static_cast<double>(m);
        double sum = 0.0;
        for (std::size_t k = 0; k < terms; ++k) {
            const double a = (prefix[k + m] - prefix[k]) / md;
            const double b = (prefix[k + 2 * m] - prefix[k + m]) / md;
            sum += (b - a) * (b - a);
        }
        curve.taus.push_back(md * cadence);
        curve.deviations.push_back(std::sqrt(sum / (2.0 * static_cast<double>(terms))));
        curve.sample_counts.push_back(terms);
    }
    return curve;
}

std::vector<double> octave_taus(std::size_t length, double cadence, double max_fraction) {
    std::vector<double> taus;
    const double limit = max_fraction * static_cast<double>(length);
    for (std::size_t m = 1; static_cast<double>(m) <= limit; m *= 2) taus.push_back(static_cast<double>(m) * cadence);
    return taus;
}

void StabilityConfig::validate() const {
    if (!(cadence > 0.0) || !(total_duration >= 3.0 * cadence))
        throw InvalidInput("campaign needs a positive cadence and at least 3 intervals");
    if (shots_per_interval < 1) throw InvalidInput("shots_per_interval must be at least 1");
    if (!std::isfinite(field)) throw InvalidInput("field must be finite");
    for (const auto& d : drifts) d.validate();
    noise.validate();
    readout.validate();
}

StabilityResult stability_experiment(const SequenceContext& ctx, const StabilityConfig& config) {
    ctx.validate();
    config.validate();
    StabilityResult result;
    result.calibration =
        calibrate_fringe(config.setup, ctx, config.noise, config.readout, config.calibration_draws, config.seed);

    const auto intervals = static_cast<std::size_t>(std::floor(config.total_duration / config.cadence + 1e-9));
    MeasurementRecord& rec = result.record;
    rec.variant = config.setup.variant;
    rec.shots_per_interval = config.shots_per_interval;
    rec.calibration_lower = result.calibration.lower();
    rec.calibration_upper = result.calibration.upper();
    rec.timestamps.resize(intervals);
    rec.counts.resize(intervals);
    rec.estimates.resize(intervals);
    rec.lower.resize(intervals);
    rec.upper.resize(intervals);
    std::vector<char> flagged(intervals);

    const double shots = static_cast<double>(config.shots_per_interval);
    parallel_for(intervals, config.threads, [&](std::size_t i) {
        const double t = static_cast<double>(i) * config.cadence;
        ShotConditions drifted = reference_shot(ctx);
        apply_drifts(config.drifts, t, drifted.params, drifted.env);

        Rng rng = make_stream(config.seed, "stability.interval", i);
        double mean = 0.0;
        if (config.noise.is_quiet()) {
            mean = shots * expected_counts(setup_population(config.setup, ctx, config.field, drifted), config.readout);
        } else {
            for (std::size_t s = 0; s < config.shots_per_interval; ++s) {
                const ShotConditions shot = draw_shot(config.noise, drifted.params, drifted.env, rng);
                mean += expected_counts(setup_population(config.setup, ctx, config.field, shot), config.readout);
            }
        }
        const std::uint64_t counts = sample_counts(mean, rng);
        const FieldPosterior post = estimate_field(counts, config.shots_per_interval, result.calibration);
        rec.timestamps[i] = t;
        rec.counts[i] = counts;
        rec.estimates[i] = post.mean;
        rec.lower[i] = post.lower;
        rec.upper[i] = post.upper;
        flagged[i] = post.at_edge ? 1 : 0;
    });
    rec.flagged.assign(flagged.begin(), flagged.end());

    const std::vector<double> taus =
        config.taus.empty() ? octave_taus(intervals, config.cadence, 0.01) : config.taus;
    result.allan = allan_deviation(rec.estimates, config.cadence, taus);
    return result;
}

std::vector<FieldPosterior> track_field(const CalibrationCurve& cal, const FieldResponse& response,
                                        const std::vector<double>& fields, std::size_t shots, std::uint64_t seed,
                                        unsigned threads) {
    if (shots < 1) throw InvalidInput("shots must be at least 1");
    std::vector<FieldPosterior> out(fields.size());
    parallel_for(fields.size(), threads, [&](std::size_t i) {
        Rng rng = make_stream(seed, "track.step", i);
        const double mean = static_cast<double>(shots) * response(fields[i]);
        out[i] = estimate_field(sample_counts(mean, rng), shots, cal);
    });
    return out;
}

void write_record_csv(const std::filesystem::path& path, const MeasurementRecord& record) {
    std::ofstream out = open_csv(path);
    out << "time_s,value,sample_count,counts,lower,upper,flagged\n";
    for (std::size_t i = 0; i < record.timestamps.size(); ++i)
        write_line(out, {record.timestamps[i], record.estimates[i], static_cast<double>(record.shots_per_interval),
                         static_cast<double>(record.counts[i]), record.lower[i], record.upper[i],
                         record.flagged[i] ? 1.0 : 0.0});
}

void write_allan_csv(const std::filesystem::path& path, const AllanCurve& curve) {
    std::ofstream out = open_csv(path);
    out << "tau_s,value,sample_count\n";
    for (std::size_t i = 0; i < curve.taus.size(); ++i)
        write_line(out, {curve.taus[i], curve.deviations[i], static_cast<double>(curve.sample_counts[i])});
}

void write_posterior_csv(const std::filesystem::path& path, const FieldPosterior& posterior) {
    std::ofstream out = open_csv(path);
    out << "field_nT,density\n";
    for (std::size_t i = 0; i < posterior.fields.size(); ++i) write_line(out, {posterior.fields[i], posterior.density[i]});
}

}  // namespace nvmag
