#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "nvmag/error.hpp"
#include "nvmag/noise.hpp"
#include "nvmag/sequences.hpp"

using namespace nvmag;

namespace {

const GroundStateParams kParams{};

EnvironmentFields base_env() {
    EnvironmentFields e;
    e.b_z = 3.0e7;
    return e;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_CASE("quiet model returns the base environment") {
    Rng rng = make_stream(1, "t");
    const EnvironmentFields e = sample_environment(NoiseModel{}, base_env(), rng);
    CHECK(e.b_z == 3.0e7);
    CHECK(e.b_x == 0.0);
    CHECK(e.e_z == 0.0);
    const ShotConditions s = draw_shot(NoiseModel{}, kParams, base_env(), rng);
    CHECK(s.params.d_g == kParams.d_g);
}

TEST_CASE("axial field draws have the requested statistics") {
    NoiseModel m;
    m.sigma_bz = 10.0;
    Rng rng = make_stream(2, "t");
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_environment(m, base_env(), rng).b_z - 3.0e7;
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(mean) < 0.1);
    CHECK(sd == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("transverse draw is split isotropically") {
    NoiseModel m;
    m.sigma_bperp = 7.0;
    Rng rng = make_stream(3, "t");
    const int n = 100000;
    double r2 = 0.0, x2 = 0.0, y2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const EnvironmentFields e = sample_environment(m, {}, rng);
        r2 += e.b_x * e.b_x + e.b_y * e.b_y;
        x2 += e.b_x * e.b_x;
        y2 += e.b_y * e.b_y;
    }
    CHECK(r2 / n == doctest::Approx(49.0).epsilon(0.02));
    CHECK(x2 / y2 == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("zero-field-splitting draws land on the parameters") {
    NoiseModel m;
    m.sigma_dg = 1e3;
    Rng rng = make_stream(4, "t");
    double sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const ShotConditions s = draw_shot(m, kParams, base_env(), rng);
        sum2 += std::pow(s.params.d_g - kParams.d_g, 2);
        CHECK(s.env.b_z == 3.0e7);
    }
    CHECK(std::sqrt(sum2 / n) == doctest::Approx(1e3).epsilon(0.03));
}

TEST_CASE("coherence envelope") {
    CHECK(coherence_envelope(0.0, 1e-3, 2.0) == 1.0);
    for (double p : {0.5, 1.0, 2.0, 3.0}) CHECK(coherence_envelope(1e-3, 1e-3, p) == doctest::Approx(std::exp(-1.0)));
    CHECK(coherence_envelope(0.5e-3, 1e-3, 2.0) == doctest::Approx(0.7788007831));
    double prev = 1.0;
    for (int i = 1; i < 50; ++i) {
        const double v = coherence_envelope(i * 1e-4, 1e-3, 2.0);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(coherence_envelope(1e-3, 2e-3, 2.0) > coherence_envelope(1e-3, 1e-3, 2.0));
    CHECK_THROWS_AS(coherence_envelope(-1.0, 1e-3, 2.0), InvalidInput);
}

TEST_CASE("t2star from axial noise matches the linear Zeeman oracle") {
    NoiseModel m;
    m.sigma_bz = 5.0;
    const double oracle = std::sqrt(2.0) / (2.0 * std::numbers::pi * 28.0 * 5.0);
    const double t01 = t2star_of_sigma(m, kParams, base_env(), Level::zero, Level::minus, 20000);
    const double tpm = t2star_of_sigma(m, kParams, base_env(), Level::minus, Level::plus, 20000);
    CHECK(t01 == doctest::Approx(oracle).epsilon(0.02));
    // Same draws, exactly twice the slope.
    CHECK(tpm == doctest::Approx(0.5 * t01).epsilon(1e-6));
}

TEST_CASE("t2star is infinite without fluctuations of the pair") {
    NoiseModel m;
    m.sigma_ez = 1e5;
    CHECK(std::isinf(t2star_of_sigma(m, kParams, base_env(), Level::minus, Level::plus)));
    CHECK(std::isfinite(t2star_of_sigma(m, kParams, base_env(), Level::zero, Level::minus)));
    CHECK(std::isinf(t2star_of_sigma(NoiseModel{}, kParams, base_env(), Level::zero, Level::minus)));
}

TEST_CASE("mechanism: strain and transverse noise favour the |+-1> pair, axial noise the other") {
    NoiseModel env_noise;
    env_noise.sigma_ez = 2e5;
    env_noise.sigma_bperp = 2e4;
    env_noise.sigma_bz = 0.5;
    const double a = t2star_of_sigma(env_noise, kParams, base_env(), Level::minus, Level::plus);
    const double b = t2star_of_sigma(env_noise, kParams, base_env(), Level::zero, Level::minus);
    CHECK(a > b);

    NoiseModel axial;
    axial.sigma_bz = 3.0;
    const double c = t2star_of_sigma(axial, kParams, base_env(), Level::minus, Level::plus);
    const double d = t2star_of_sigma(axial, kParams, base_env(), Level::zero, Level::minus);
    CHECK(c < d);
    CHECK(d / c == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("Monte Carlo Ramsey decay follows the Gaussian T2* envelope") {
    SequenceContext ctx;
    NoiseModel m;
    m.sigma_bz = 4.0;
    const double t2s = t2star_of_sigma(m, ctx.params, ctx.base, Level::zero, Level::minus, 50000);
    for (double frac : {0.5, 1.0}) {
        const double t = frac * t2s;
        RamseyParams p;
        p.variant = Variant::ramsey_01;
        p.free_time = t;
        double sum = 0.0;
        const int shots = 10000;
        for (int s = 0; s < shots; ++s)
            sum += run_ramsey(ctx, p, m, static_cast<std::uint64_t>(s + 100)).populations[Level::minus];
        const double contrast = 2.0 * sum / shots - 1.0;
        CHECK(contrast == doctest::Approx(std::exp(-frac * frac)).epsilon(0.05));
    }
}

TEST_CASE("drift traces interpolate linearly and hold at the ends") {
    DriftTrace d;
    d.channel = DriftChannel::dg;
    d.times = {0.0, 10.0, 20.0};
    d.offsets = {0.0, 100.0, 50.0};
    CHECK(d.offset_at(-5.0) == 0.0);
    CHECK(d.offset_at(5.0) == doctest::Approx(50.0));
    CHECK(d.offset_at(15.0) == doctest::Approx(75.0));
    CHECK(d.offset_at(99.0) == 50.0);

    GroundStateParams p;
    EnvironmentFields e;
    DriftTrace b{DriftChannel::bz, {0.0, 1.0}, {0.0, 2.0}};
    apply_drifts({d, b}, 5.0, p, e);
    CHECK(p.d_g == doctest::Approx(2.87e9 + 50.0));
    CHECK(e.b_z == 2.0);

    DriftTrace bad{DriftChannel::bz, {0.0, 0.0}, {1.0, 2.0}};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("drift CSV loading") {
    const auto ok = temp_file("nvmag_drift_ok.csv", "time_s,offset\n0,0\n100,5\n200,-5\n");
    const DriftTrace d = load_drift_csv(ok, DriftChannel::bz);
    CHECK(d.times.size() == 3);
    CHECK(d.offset_at(150.0) == doctest::Approx(0.0));

    const auto unsorted = temp_file("nvmag_drift_bad.csv", "0,0\n10,1\n5,2\n");
    CHECK_THROWS_AS(load_drift_csv(unsorted, DriftChannel::bz), InvalidInput);
    const auto garbage = temp_file("nvmag_drift_garbage.csv", "0,0\nabc,def\n");
    CHECK_THROWS_AS(load_drift_csv(garbage, DriftChannel::bz), InvalidInput);
    CHECK_THROWS_AS(load_drift_csv("/nonexistent/drift.csv", DriftChannel::bz), InvalidInput);
    std::filesystem::remove(ok);
    std::filesystem::remove(unsorted);
    std::filesystem::remove(garbage);
}

TEST_CASE("invalid noise models") {
    NoiseModel m;
    m.sigma_bz = -1.0;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
    m = NoiseModel{};
    m.t2 = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
    m = NoiseModel{};
    m.p_exponent = 0.0;
    CHECK_THROWS_AS(m.validate(), InvalidInput);
}
