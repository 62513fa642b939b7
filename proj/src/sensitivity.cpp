#include "nvmag/sensitivity.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nvmag/error.hpp"

namespace nvmag {

void to_json(nlohmann::json& j, const SensitivityReport& r) {
    j = nlohmann::json{{"method", r.method},
                       {"min_field_nT_per_rtHz", r.min_field},
                       {"operating_point", r.operating_point},
                       {"tau_s", r.tau},
                       {"n_photons", r.n_photons},
                       {"delta_s", r.delta_s}};
    if (!std::isfinite(r.min_field)) j["min_field_nT_per_rtHz"] = nullptr;
    if (r.g_max) j["g_max_counts_per_nT"] = *r.g_max;
    if (r.c0) j["c0"] = *r.c0;
    if (r.t2) j["t2_s"] = *r.t2;
    if (r.p) j["p"] = *r.p;
}

GradientResult max_gradient(const Spectrum& spectrum, int delta_s, double gyromag) {
    const auto& x = spectrum.detunings;
    const auto& c = spectrum.counts;
    if (x.size() != c.size()) throw InvalidInput("spectrum axes differ in length");
    if (x.size() < 3) throw InvalidInput("gradient extraction needs at least 3 spectrum points");
    if (delta_s != 1 && delta_s != 2) throw InvalidInput("delta_s must be 1 or 2");
    if (!(gyromag > 0.0)) throw InvalidInput("gyromag must be positive");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw InvalidInput("spectrum detunings must be strictly increasing");

    const double hz_per_nt = delta_s * gyromag;
    const std::size_t n = x.size();
    GradientResult best;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
        const double g = std::abs((c[hi] - c[lo]) / ((x[hi] - x[lo]) / hz_per_nt));
        if (g > best.g_max) best = {g, x[i], c[i]};
    }
    if (best.g_max == 0.0) best = {0.0, x[n / 2], c[n / 2]};
    return best;
}

double dc_sensitivity(double tau_dc, double n_photons, double g_max) {
    if (!(tau_dc > 0.0)) throw InvalidInput("tau_dc must be positive");
    if (!(n_photons > 0.0)) throw InvalidInput("n_photons must be positive");
    if (!(g_max > 0.0)) return std::numeric_limits<double>::infinity();
    return std::sqrt(tau_dc / n_photons) / g_max;
}

double ac_sensitivity(double n_photons, double tau_ac, double c0, double t2, double p, int delta_s,
                      double gyromag) {
    if (!(n_photons > 0.0) || !(tau_ac > 0.0) || !(c0 > 0.0) || !(t2 > 0.0) || !(p > 0.0) || !(gyromag > 0.0))
        throw InvalidInput("AC sensitivity inputs must be positive");
    if (delta_s != 1 && delta_s != 2) throw InvalidInput("delta_s must be 1 or 2");
    const double envelope = std::exp(-std::pow(tau_ac / t2, p));
    return std::sqrt(1.0 / (n_photons * tau_ac)) / (2.0 * c0 * envelope * delta_s * gyromag);
}

std::string_view to_string(SequenceFamily f) {
    switch (f) {
        case SequenceFamily::pulsed_odmr: return "pulsed_odmr";
        case SequenceFamily::continuous_two_tone: return "continuous_two_tone";
        case SequenceFamily::optimized: return "optimized";
    }
    return "?";
}

std::optional<SequenceFamily> parse_family(std::string_view text) {
    for (auto f : {SequenceFamily::pulsed_odmr, SequenceFamily::continuous_two_tone, SequenceFamily::optimized})
        if (to_string(f) == text) return f;
    return std::nullopt;
}

std::vector<SensitivityReport> sensitivity_vs_duration(SequenceFamily family, const std::vector<double>& durations,
                                                       const SequenceContext& ctx, const NoiseModel& noise,
                                                       const ReadoutParams& readout, const CurveOptions& options) {
    if (durations.empty()) throw InvalidInput("duration grid must be non-empty");
    if (options.grid_points < 3) throw InvalidInput("sweep needs at least 3 points");
    if (!(options.span > 0.0)) throw InvalidInput("sweep span must be positive");
    if (!(options.overhead >= 0.0)) throw InvalidInput("overhead must be non-negative");
    if (family == SequenceFamily::optimized && !options.genome_for)
        throw InvalidInput("the optimized family needs a waveform source");

    std::vector<SensitivityReport> out;
    for (std::size_t k = 0; k < durations.size(); ++k) {
        const double t = durations[k];
        if (!(t > 0.0)) throw InvalidInput("durations must be positive");
        const double half_width = options.span / t;
        std::vector<double> grid(options.grid_points);
        for (std::size_t i = 0; i < grid.size(); ++i)
            grid[i] = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(grid.size() - 1);

        ShotReadout fn;
        int ds = 2;
        switch (family) {
            case SequenceFamily::pulsed_odmr:
                ds = 1;
                fn = [&ctx, t](double detuning, const ShotConditions& shot) {
                    return odmr_populations(ctx, t, detuning, shot)[Level::zero];
                };
                break;
            case SequenceFamily::continuous_two_tone: {
                TwoToneParams tt;
                tt.duration = t;
                tt.raman_detuning = raman_detuning_for(t, options.raman_detuning);
                fn = [&ctx, tt](double offset, const ShotConditions& shot) {
                    TwoToneParams q = tt;
                    q.two_photon_offset = offset;
                    return run_two_tone_transfer(ctx, q, shot).readout_population;
                };
                break;
            }
            case SequenceFamily::optimized: {
                const WaveformGenome genome = options.genome_for(t);
                WaveformPlayback playback;
                playback.raman_detuning = raman_detuning_for(t, options.raman_detuning);
                fn = [&ctx, genome, playback](double offset, const ShotConditions& shot) {
                    WaveformPlayback q = playback;
                    q.two_photon_offset = offset;
                    return run_custom_waveform(ctx, genome, q, shot).readout_population;
                };
                break;
            }
        }
        const Spectrum spectrum =
            expected_spectrum(ctx, grid, noise, readout, options.draws, derive_seed(options.seed, "curve", k),
                              options.threads, fn);
        const GradientResult g = max_gradient(spectrum, ds, ctx.params.gyromag);

        SensitivityReport r;
        r.method = "dc";
        r.tau = t + options.overhead;
        r.n_photons = g.counts_at_operating;
        r.delta_s = ds;
        r.g_max = g.g_max;
        r.operating_point = g.operating_detuning;
        r.min_field = dc_sensitivity(r.tau, r.n_photons, g.g_max / r.n_photons);
        out.push_back(r);
    }
    return out;
}

SensitivityReport monte_carlo_ac_sensitivity(const SequenceContext& ctx, Variant variant, double tau,
                                             const NoiseModel& noise, const ReadoutParams& readout,
                                             std::size_t shots, std::uint64_t seed) {
    if (shots < 2) throw InvalidInput("Monte Carlo needs at least two shots");
    CpmgParams p;
    p.variant = variant;
    p.period = tau;
    p.echoes = 1;
    p.readout_phase = 0.5 * std::numbers::pi;
    p.validate();

    const int ds = variant_delta_s(variant);
    const double g = ctx.params.gyromag;
    // Field amplitude giving 1 mrad of phase: phase = 4 ds g tau A for one echo.
    const double probe = 1e-3 / (4.0 * ds * g * tau);
    const ShotConditions ref = reference_shot(ctx);
    auto counts_at = [&](double amplitude) {
        CpmgParams q = p;
        q.ac_amplitude = amplitude;
        return expected_counts(run_cpmg_ac(ctx, q, noise, ref).readout_population, readout);
    };
    const double slope = std::abs(counts_at(probe) - counts_at(-probe)) / (2.0 * probe);

    Rng rng = make_stream(seed, "ac.montecarlo");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < shots; ++i) {
        const ShotConditions shot = draw_shot(noise, ctx.params, ctx.base, rng);
        const double mu = expected_counts(run_cpmg_ac(ctx, p, noise, shot).readout_population, readout);
        const double x = static_cast<double>(sample_counts(mu, rng));
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    const double sd = std::sqrt(m2 / static_cast<double>(shots - 1));

    SensitivityReport r;
    r.method = "ac_monte_carlo";
    r.tau = tau;
    r.operating_point = tau;
    r.n_photons = readout.bright_counts;
    r.delta_s = ds;
    r.c0 = readout.contrast_c0;
    r.t2 = noise.t2;
    r.p = noise.p_exponent;
    r.min_field = slope > 0.0 ? sd / slope * std::sqrt(tau) : std::numeric_limits<double>::infinity();
    return r;
}

}  // namespace nvmag
