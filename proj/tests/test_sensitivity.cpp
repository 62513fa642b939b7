#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "nvmag/error.hpp"
#include "nvmag/sensitivity.hpp"

using namespace nvmag;

namespace {

constexpr double kPi = std::numbers::pi;

// Hand evaluation of the echo formula.
double ac_oracle(double n, double tau, double c0, double t2, double p, int ds, double g) {
    return 1.0 / std::sqrt(n * tau) / (2.0 * c0 * std::exp(-std::pow(tau / t2, p)) * ds * g);
}

Spectrum lorentzian(double width, double depth, std::size_t points, double span) {
    Spectrum s;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = -span + 2.0 * span * static_cast<double>(i) / static_cast<double>(points - 1);
        s.detunings.push_back(x);
        s.counts.push_back(1.0 - depth / (1.0 + x * x / (width * width)));
    }
    return s;
}

}  // namespace

TEST_CASE("dc sensitivity examples") {
    CHECK(dc_sensitivity(1e-4, 0.05, 0.01) == doctest::Approx(std::sqrt(2e-3) / 0.01));
    CHECK(dc_sensitivity(1e-4, 0.05, 0.01) == doctest::Approx(4.4721359549995796));
    CHECK(dc_sensitivity(1e-4, 0.05, 0.01) / dc_sensitivity(1e-4, 0.1, 0.01) == doctest::Approx(std::sqrt(2.0)));
    CHECK(dc_sensitivity(1e-4, 0.05, 0.005) / dc_sensitivity(1e-4, 0.05, 0.01) == doctest::Approx(2.0));
    CHECK(std::isinf(dc_sensitivity(1e-4, 0.05, 0.0)));
    CHECK(std::isinf(dc_sensitivity(1e-4, 0.05, -1.0)));
    CHECK_THROWS_AS(dc_sensitivity(0.0, 0.05, 0.01), InvalidInput);
    CHECK_THROWS_AS(dc_sensitivity(1e-4, 0.0, 0.01), InvalidInput);
}

TEST_CASE("ac sensitivity examples") {
    const double s2 = ac_sensitivity(0.05, 1e-3, 0.3, 2.36e-3, 2.0, 2, 28.0);
    CHECK(s2 == doctest::Approx(ac_oracle(0.05, 1e-3, 0.3, 2.36e-3, 2.0, 2, 28.0)).epsilon(1e-14));
    CHECK(s2 == doctest::Approx(5.04).epsilon(1e-3));

    const double s1 = ac_sensitivity(0.05, 1e-3, 0.3, 1.66e-3, 2.0, 1, 28.0);
    CHECK(s1 > s2);

    // Each at half its own T2 the envelopes coincide.
    const double a = ac_sensitivity(0.05, 0.5 * 1.66e-3, 0.3, 1.66e-3, 2.0, 1, 28.0);
    const double b = ac_sensitivity(0.05, 0.5 * 2.36e-3, 0.3, 2.36e-3, 2.0, 2, 28.0);
    CHECK(a / b == doctest::Approx(2.0 * std::sqrt(2.36 / 1.66)).epsilon(1e-12));
    CHECK(a / b == doctest::Approx(2.385).epsilon(1e-3));

    // Short-time divergence as 1/sqrt(tau).
    const double r = ac_sensitivity(0.05, 1e-9, 0.3, 2.36e-3, 2.0, 2, 28.0) /
                     ac_sensitivity(0.05, 4e-9, 0.3, 2.36e-3, 2.0, 2, 28.0);
    CHECK(r == doctest::Approx(2.0).epsilon(1e-5));

    CHECK_THROWS_AS(ac_sensitivity(0.05, 1e-3, 0.3, 2.36e-3, 2.0, 3, 28.0), InvalidInput);
    CHECK_THROWS_AS(ac_sensitivity(0.05, 0.0, 0.3, 2.36e-3, 2.0, 2, 28.0), InvalidInput);
}

TEST_CASE("both formulas scale as one over root N") {
    for (double k : {2.0, 10.0, 0.3}) {
        CHECK(dc_sensitivity(1e-4, 0.05 * k, 0.01) * std::sqrt(k) == doctest::Approx(dc_sensitivity(1e-4, 0.05, 0.01)));
        CHECK(ac_sensitivity(0.05 * k, 1e-3, 0.3, 2.36e-3, 2.0, 2, 28.0) * std::sqrt(k) ==
              doctest::Approx(ac_sensitivity(0.05, 1e-3, 0.3, 2.36e-3, 2.0, 2, 28.0)));
    }
}

TEST_CASE("ac sensitivity is minimized near half of T2 for p = 2") {
    const double t2 = 2.36e-3;
    std::size_t best = 0;
    std::vector<double> taus, vals;
    for (int i = 1; i <= 2000; ++i) {
        taus.push_back(t2 * i / 1000.0);
        vals.push_back(ac_sensitivity(0.05, taus.back(), 0.3, t2, 2.0, 2, 28.0));
        if (vals.back() < vals[best]) best = vals.size() - 1;
    }
    CHECK(taus[best] >= 0.4 * t2);
    CHECK(taus[best] <= 0.6 * t2);
    // Slope changes sign across the minimum.
    CHECK(vals[best - 1] > vals[best]);
    CHECK(vals[best + 1] > vals[best]);
    // Independent oracle: minimize sqrt(1/tau) exp((tau/T2)^2) by golden section.
    double lo = 0.01 * t2, hi = 2.0 * t2;
    auto f = [&](double x) { return std::exp(std::pow(x / t2, 2)) / std::sqrt(x); };
    for (int i = 0; i < 200; ++i) {
        const double m1 = lo + 0.382 * (hi - lo), m2 = lo + 0.618 * (hi - lo);
        (f(m1) < f(m2) ? hi : lo) = f(m1) < f(m2) ? m2 : m1;
    }
    CHECK(taus[best] == doctest::Approx(0.5 * (lo + hi)).epsilon(2e-3));
}

TEST_CASE("max gradient on symmetric and flat spectra") {
    const Spectrum s = lorentzian(1e5, 0.3, 401, 5e5);
    const GradientResult g = max_gradient(s, 1, 28.0);
    CHECK(std::abs(g.operating_detuning) > 0.0);
    // Same gradient magnitude at the mirror point on the other flank.
    const std::size_t n = s.detunings.size();
    std::size_t i = 0;
    while (s.detunings[i] != g.operating_detuning) ++i;
    const std::size_t j = n - 1 - i;
    const double mirror = std::abs((s.counts[j + 1] - s.counts[j - 1]) / (s.detunings[j + 1] - s.detunings[j - 1])) * 28.0;
    CHECK(mirror == doctest::Approx(g.g_max).epsilon(1e-9));
    CHECK(s.detunings[j] == doctest::Approx(-g.operating_detuning));
    // Analytic: max |dL/dx| = depth * 3 sqrt(3) / (8 width), per Hz; times 28 Hz/nT.
    CHECK(g.g_max == doctest::Approx(0.3 * 3.0 * std::sqrt(3.0) / (8.0 * 1e5) * 28.0).epsilon(1e-3));
    // delta_s = 2 doubles the field-axis gradient.
    CHECK(max_gradient(s, 2, 28.0).g_max == doctest::Approx(2.0 * g.g_max));

    Spectrum flat{{-1.0, 0.0, 1.0}, {0.5, 0.5, 0.5}};
    const GradientResult z = max_gradient(flat, 1, 28.0);
    CHECK(z.g_max == 0.0);
    CHECK(std::isinf(dc_sensitivity(1e-4, 0.05, z.g_max)));

    CHECK_THROWS_AS(max_gradient(Spectrum{{0.0, 1.0}, {1.0, 1.0}}, 1, 28.0), InvalidInput);
    CHECK_THROWS_AS(max_gradient(Spectrum{{0.0, 2.0, 1.0}, {1.0, 1.0, 1.0}}, 1, 28.0), InvalidInput);
}

TEST_CASE("pulsed ODMR gradient agrees with the analytic Rabi line") {
    SequenceContext ctx;
    ReadoutParams readout;
    const double t = 1e-6;
    const double span = 3e6;
    std::vector<double> grid;
    for (int i = 0; i <= 600; ++i) grid.push_back(-span + 2.0 * span * i / 600.0);
    const Spectrum s = expected_spectrum(ctx, grid, NoiseModel{}, readout, 1, 1, 1,
                                         [&](double d, const ShotConditions& shot) {
                                             return odmr_populations(ctx, t, d, shot)[Level::zero];
                                         });
    const GradientResult g = max_gradient(s, 1, 28.0);

    const double rabi = 0.5 / t;
    auto transfer = [&](double d) {
        const double w = std::hypot(rabi, d);
        return rabi * rabi / (w * w) * std::pow(std::sin(kPi * w * t), 2);
    };
    double best = 0.0;
    const double h = 1.0;
    for (int i = 0; i <= 300000; ++i) {
        const double d = -span + 2.0 * span * i / 300000.0;
        best = std::max(best, std::abs(transfer(d + h) - transfer(d - h)) / (2.0 * h));
    }
    const double analytic = readout.bright_counts * readout.contrast_c0 * best * 28.0;
    CHECK(g.g_max == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("report serialization") {
    SensitivityReport r;
    r.method = "ac";
    r.min_field = 5.0;
    r.c0 = 0.3;
    nlohmann::json j = r;
    CHECK(j["method"] == "ac");
    CHECK(j["min_field_nT_per_rtHz"] == 5.0);
    CHECK(j["c0"] == 0.3);
    CHECK_FALSE(j.contains("g_max_counts_per_nT"));
    r.min_field = std::numeric_limits<double>::infinity();
    j = r;
    CHECK(j["min_field_nT_per_rtHz"].is_null());
}

TEST_CASE("sequence family names") {
    CHECK(parse_family("optimized") == SequenceFamily::optimized);
    CHECK(to_string(SequenceFamily::pulsed_odmr) == "pulsed_odmr");
    CHECK_FALSE(parse_family("cw").has_value());
}

TEST_CASE("two-tone transfer beats pulsed ODMR between the two dephasing times") {
    SequenceContext ctx;
    ReadoutParams readout;
    NoiseModel noise;
    noise.sigma_ez = 1e6;
    noise.sigma_bz = 0.1;
    const double t01 = t2star_of_sigma(noise, ctx.params, ctx.base, Level::zero, Level::minus);
    const double tpm = t2star_of_sigma(noise, ctx.params, ctx.base, Level::minus, Level::plus);
    const double duration = 5e-5;
    REQUIRE(duration > 5.0 * t01);
    REQUIRE(duration < 0.1 * tpm);
    CurveOptions opt;
    opt.draws = 100;
    const auto odmr = sensitivity_vs_duration(SequenceFamily::pulsed_odmr, {duration}, ctx, noise, readout, opt);
    const auto two = sensitivity_vs_duration(SequenceFamily::continuous_two_tone, {duration}, ctx, noise, readout, opt);
    CHECK(two[0].min_field < odmr[0].min_field);
    CHECK(two[0].delta_s == 2);
    CHECK(odmr[0].delta_s == 1);
}

TEST_CASE("short sequences converge toward the Fourier limit") {
    SequenceContext ctx;
    ReadoutParams readout;
    CurveOptions opt;
    const auto odmr = sensitivity_vs_duration(SequenceFamily::pulsed_odmr, {1e-6}, ctx, NoiseModel{}, readout, opt);
    const auto two = sensitivity_vs_duration(SequenceFamily::continuous_two_tone, {1e-6}, ctx, NoiseModel{}, readout, opt);
    const double ratio = odmr[0].min_field / two[0].min_field;
    CHECK(ratio > 1.0 / 2.2);
    CHECK(ratio < 2.2);

    // Without noise both improve as the line narrows.
    const auto longer = sensitivity_vs_duration(SequenceFamily::pulsed_odmr, {1e-6, 1e-5}, ctx, NoiseModel{}, readout, opt);
    CHECK(longer[1].min_field < longer[0].min_field);
}

TEST_CASE("curve inputs are validated") {
    SequenceContext ctx;
    CurveOptions opt;
    CHECK_THROWS_AS(sensitivity_vs_duration(SequenceFamily::pulsed_odmr, {}, ctx, NoiseModel{}, ReadoutParams{}, opt),
                    InvalidInput);
    CHECK_THROWS_AS(sensitivity_vs_duration(SequenceFamily::optimized, {1e-5}, ctx, NoiseModel{}, ReadoutParams{}, opt),
                    InvalidInput);
    opt.grid_points = 2;
    CHECK_THROWS_AS(sensitivity_vs_duration(SequenceFamily::pulsed_odmr, {1e-5}, ctx, NoiseModel{}, ReadoutParams{}, opt),
                    InvalidInput);
}

TEST_CASE("Monte Carlo echo sensitivity agrees with the closed form") {
    SequenceContext ctx;
    ReadoutParams readout;
    NoiseModel noise;  // T2 = 2.36 ms, p = 2
    const double tau = 1e-3;
    const SensitivityReport mc =
        monte_carlo_ac_sensitivity(ctx, Variant::cpmg_ac_pm1, tau, noise, readout, 100000, 5);
    const double formula = ac_sensitivity(readout.bright_counts, tau, readout.contrast_c0, noise.t2,
                                          noise.p_exponent, 2, ctx.params.gyromag);
    CHECK(mc.min_field == doctest::Approx(formula).epsilon(0.15));
    CHECK(mc.delta_s == 2);
}
