#include "nvmag/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "nvmag/error.hpp"

namespace nvmag {

void NoiseModel::validate() const {
    for (double s : {sigma_bz, sigma_bperp, sigma_ez, sigma_dg})
        if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("noise sigmas must be finite and non-negative");
    if (!(t2 > 0.0) || !std::isfinite(t2)) throw InvalidInput("t2 must be positive");
    if (!(p_exponent > 0.0) || !std::isfinite(p_exponent)) throw InvalidInput("p_exponent must be positive");
}

EnvironmentFields sample_environment(const NoiseModel& model, const EnvironmentFields& base, Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    EnvironmentFields env = base;
    // Fixed draw order keeps streams reproducible even for zero sigmas.
    const double zb = unit(rng);
    const double zx = unit(rng);
    const double zy = unit(rng);
    const double ze = unit(rng);
    env.b_z += model.sigma_bz * zb;
    if (model.sigma_bperp > 0.0) {
        const double per_axis = model.sigma_bperp / std::sqrt(2.0);
        env.b_x += per_axis * zx;
        env.b_y += per_axis * zy;
    }
    env.e_z += model.sigma_ez * ze;
    return env;
}

ShotConditions draw_shot(const NoiseModel& model, const GroundStateParams& params,
                         const EnvironmentFields& base, Rng& rng) {
    ShotConditions shot{params, sample_environment(model, base, rng)};
    std::normal_distribution<double> unit(0.0, 1.0);
    shot.params.d_g += model.sigma_dg * unit(rng);
    return shot;
}

double coherence_envelope(double tau, double t2, double p) {
    if (!(tau >= 0.0)) throw InvalidInput("tau must be non-negative");
    if (!(t2 > 0.0) || !(p > 0.0)) throw InvalidInput("t2 and p must be positive");
    return std::exp(-std::pow(tau / t2, p));
}

double t2star_of_sigma(const NoiseModel& model, const GroundStateParams& params,
                       const EnvironmentFields& base, Level a, Level b, std::size_t draws,
                       std::uint64_t seed) {
    model.validate();
    if (draws < 2) throw InvalidInput("t2star_of_sigma needs at least two draws");
    if (model.is_quiet()) return std::numeric_limits<double>::infinity();

    Rng rng = make_stream(seed, "noise.t2star");
    const double reference = transition_frequency(level_energies(params, base), a, b);
    // Welford accumulation of the frequency deviation.
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const ShotConditions shot = draw_shot(model, params, base, rng);
        const double x = transition_frequency(level_energies(shot.params, shot.env), a, b) - reference;
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }
    const double sigma_f = std::sqrt(m2 / static_cast<double>(draws - 1));
    if (sigma_f <= 1e-12 * reference) return std::numeric_limits<double>::infinity();
    return std::sqrt(2.0) / (2.0 * std::numbers::pi * sigma_f);
}

void DriftTrace::validate() const {
    if (times.empty() || times.size() != offsets.size())
        throw InvalidInput("drift trace needs matching, non-empty time and offset columns");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InvalidInput("drift timestamps must be strictly increasing");
    for (double v : offsets)
        if (!std::isfinite(v)) throw InvalidInput("drift offsets must be finite");
}

double DriftTrace::offset_at(double t) const {
    if (t <= times.front()) return offsets.front();
    if (t >= times.back()) return offsets.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return offsets[lo] + w * (offsets[hi] - offsets[lo]);
}

DriftTrace load_drift_csv(const std::filesystem::path& path, DriftChannel channel) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open drift trace " + path.string());
    DriftTrace trace;
    trace.channel = channel;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double t = 0.0, v = 0.0;
        if (!(fields >> t >> v)) {
            if (row == 1) continue;
            throw InvalidInput("malformed drift trace row " + std::to_string(row) + " in " + path.string());
        }
        trace.times.push_back(t);
        trace.offsets.push_back(v);
    }
    trace.validate();
    return trace;
}

void apply_drifts(const std::vector<DriftTrace>& drifts, double t, GroundStateParams& params,
                  EnvironmentFields& env) {
    for (const DriftTrace& d : drifts) {
        if (d.channel == DriftChannel::bz)
            env.b_z += d.offset_at(t);
        else
            params.d_g += d.offset_at(t);
    }
}

}  // namespace nvmag
