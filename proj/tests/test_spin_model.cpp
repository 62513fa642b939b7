#include <doctest.h>

#include <cmath>
#include <random>

#include "nvmag/error.hpp"
#include "nvmag/spin_model.hpp"

using namespace nvmag;

namespace {

const GroundStateParams kParams{};

EnvironmentFields axial(double bz) {
    EnvironmentFields e;
    e.b_z = bz;
    return e;
}

// Second-order perturbation theory for a small transverse field at axial
// Zeeman energy b (Hz): curvature ratio of {0,-1} to {-1,+1}.
double curvature_oracle(double d, double b) { return (2.0 / (d - b) + 1.0 / (d + b)) / (2.0 * b / (d * d - b * b)); }

}  // namespace

TEST_CASE("ground Hamiltonian diagonal examples") {
    auto h = ground_hamiltonian(kParams, {}).matrix;
    CHECK(h(0, 0).real() == 0.0);
    CHECK(h(1, 1).real() == 2.87e9);
    CHECK(h(2, 2).real() == 2.87e9);

    h = ground_hamiltonian(kParams, axial(3.0e7)).matrix;
    CHECK(h(1, 1).real() == doctest::Approx(2.87e9 + 8.4e8).epsilon(1e-15));
    CHECK(h(2, 2).real() == doctest::Approx(2.87e9 - 8.4e8).epsilon(1e-15));

    EnvironmentFields e;
    e.e_z = 1e6;
    h = ground_hamiltonian(kParams, e).matrix;
    CHECK(h(1, 1).real() == doctest::Approx(2.87e9 + 3.5e4).epsilon(1e-15));
    CHECK(h(2, 2).real() == h(1, 1).real());
}

TEST_CASE("ground Hamiltonian off-diagonal structure") {
    EnvironmentFields e{3.0, -2.0, 10.0, 4.0, 5.0, 0.0};
    const BasisMatrix h = ground_hamiltonian(kParams, e);
    CHECK(h.basis == Basis::ground);
    const cplx beta(-e.b_y / std::sqrt(2.0), e.b_x / std::sqrt(2.0));
    CHECK(std::abs(h(Level::zero, Level::plus) - 28.0 * beta) < 1e-12);
    CHECK(std::abs(h(Level::zero, Level::minus) - 28.0 * std::conj(beta)) < 1e-12);
    CHECK(std::abs(h(Level::plus, Level::minus) - 0.17 * cplx(4.0, 5.0)) < 1e-12);
}

TEST_CASE("ground Hamiltonian is Hermitian for random fields") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> b(-1e7, 1e7), el(-1e7, 1e7);
    for (int i = 0; i < 1000; ++i) {
        const EnvironmentFields env{b(rng), b(rng), b(rng), el(rng), el(rng), el(rng)};
        const auto h = ground_hamiltonian(kParams, env).matrix;
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * h.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("non-finite inputs are rejected") {
    EnvironmentFields e;
    e.b_x = std::nan("");
    CHECK_THROWS_AS(ground_hamiltonian(kParams, e), InvalidInput);
    GroundStateParams p;
    p.d_perp = 0.0;
    CHECK_THROWS_AS(level_energies(p, {}), InvalidInput);
}

TEST_CASE("level energies at 30 mT and with transverse strain") {
    const LevelDiagram d = level_energies(kParams, axial(3.0e7));
    CHECK(d.energy(Level::zero) == 0.0);
    CHECK(d.energy(Level::plus) == 2.87e9 + 8.4e8);
    CHECK(d.energy(Level::minus) == 2.87e9 - 8.4e8);

    EnvironmentFields e = axial(3.0e7);
    e.e_x = 1e6 / 0.17;  // d_perp |E_perp| = 1 MHz
    const LevelDiagram s = level_energies(kParams, e);
    const double r = std::sqrt(8.4e8 * 8.4e8 + 1e6 * 1e6);
    CHECK(s.energy(Level::plus) == doctest::Approx(2.87e9 + r).epsilon(1e-12));
    CHECK(s.energy(Level::minus) == doctest::Approx(2.87e9 - r).epsilon(1e-12));
    CHECK(s.energy(Level::plus) - (2.87e9 + 8.4e8) == doctest::Approx(595.238).epsilon(1e-4));
}

TEST_CASE("closed-form eigenvalues for 100 random axial field and strain draws") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> bz(1e3, 5e7), el(-5e7, 5e7);
    for (int i = 0; i < 100; ++i) {
        EnvironmentFields e;
        e.b_z = bz(rng);
        e.e_x = el(rng);
        e.e_y = el(rng);
        const LevelDiagram d = level_energies(kParams, e);
        const double r = std::sqrt(std::pow(28.0 * e.b_z, 2) + 0.17 * 0.17 * (e.e_x * e.e_x + e.e_y * e.e_y));
        CHECK(std::abs(d.energy(Level::plus) - (2.87e9 + r)) <= 1e-9 * (2.87e9 + r));
        CHECK(std::abs(d.energy(Level::minus) - (2.87e9 - r)) <= 1e-9 * (2.87e9 - r));
        CHECK(d.energy(Level::zero) == 0.0);
    }
}

TEST_CASE("numerical diagonalization agrees with the exact block path") {
    // A vanishing transverse field forces the general eigen-solver route.
    EnvironmentFields e = axial(2.0e7);
    e.e_x = 3e6;
    e.e_y = -1e6;
    const LevelDiagram exact = level_energies(kParams, e);
    e.b_x = 1e-6;
    const LevelDiagram numeric = level_energies(kParams, e);
    for (Level l : kLevels) CHECK(numeric.energy(l) == doctest::Approx(exact.energy(l)).epsilon(1e-12));
}

TEST_CASE("labels stay attached to the dominant basis state") {
    EnvironmentFields e = axial(-3.0e7);  // |-1> above |+1>
    e.b_x = 1e5;
    const LevelDiagram d = level_energies(kParams, e);
    CHECK(d.energy(Level::minus) > d.energy(Level::plus));
    CHECK(d.energy(Level::zero) < 0.0);  // pushed down by the transverse coupling
}

TEST_CASE("equal mixing at zero axial field raises a degeneracy error") {
    EnvironmentFields e;
    e.e_x = 1e6;
    try {
        level_energies(kParams, e);
        FAIL("expected DegeneracyError");
    } catch (const DegeneracyError& err) {
        const auto& ev = err.eigenvalues();
        CHECK(ev[1] - ev[2] == doctest::Approx(2.0 * 0.17 * 1e6));
    }
}

TEST_CASE("transition frequencies") {
    const LevelDiagram d = level_energies(kParams, axial(3.0e7));
    CHECK(transition_frequency(d, Level::zero, Level::minus) == 2.03e9);
    CHECK(transition_frequency(d, Level::minus, Level::zero) == 2.03e9);
    CHECK(transition_frequency(d, Level::minus, Level::plus) == 1.68e9);
    CHECK_THROWS_AS(transition_frequency(d, Level::plus, Level::plus), InvalidInput);

    EnvironmentFields e = axial(3.0e7);
    e.e_z = 1e6;
    CHECK(transition_frequency(level_energies(kParams, e), Level::minus, Level::plus) == 1.68e9);
}

TEST_CASE("{-1,+1} splitting is exactly immune to e_z and d_g") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ez(-1e8, 1e8), dg(-1e6, 1e6), bz(1e5, 5e7), ex(-1e7, 1e7);
    for (int i = 0; i < 200; ++i) {
        EnvironmentFields e = axial(bz(rng));
        e.e_x = ex(rng);
        e.e_y = ex(rng);
        const double ref = transition_frequency(level_energies(kParams, e), Level::minus, Level::plus);
        EnvironmentFields shifted = e;
        shifted.e_z = ez(rng);
        GroundStateParams p = kParams;
        p.d_g += dg(rng);
        const double f = transition_frequency(level_energies(p, shifted), Level::minus, Level::plus);
        CHECK(std::abs(f - ref) <= 1e-12 * ref);
    }
}

TEST_CASE("{0,-1} frequency moves linearly with e_z at slope d_parallel") {
    const double f0 = transition_frequency(level_energies(kParams, axial(3.0e7)), Level::zero, Level::minus);
    for (double ez : {-2e6, 1e5, 7e6}) {
        EnvironmentFields e = axial(3.0e7);
        e.e_z = ez;
        const double f = transition_frequency(level_energies(kParams, e), Level::zero, Level::minus);
        CHECK(f - f0 == doctest::Approx(3.5e-2 * ez).epsilon(1e-6));
    }
}

TEST_CASE("transverse curvature ratio") {
    const double b = 28.0 * 3.0e7;
    const double r = transverse_curvature_ratio(kParams, 3.0e7);
    const double oracle = curvature_oracle(2.87e9, b);
    CHECK(oracle == doctest::Approx(5.625));
    CHECK(r >= 4.0);
    CHECK(r <= 7.0);
    CHECK(std::abs(r / oracle - 1.0) < 0.05);
    CHECK(transverse_curvature_ratio(kParams, 3.0e7, TransverseAxis::y) == doctest::Approx(r).epsilon(1e-6));

    // Near the anti-crossing both the numerics and the oracle move together.
    const double high_field = 0.9 * 2.87e9 / 28.0;
    const double rh = transverse_curvature_ratio(kParams, high_field);
    const double oracle_h = curvature_oracle(2.87e9, 0.9 * 2.87e9);
    CHECK(std::abs(rh / oracle_h - 1.0) < 0.05);
    CHECK(rh < r);
}

TEST_CASE("curvature ratio rejects the anti-crossing and out-of-range fields") {
    CHECK_THROWS_AS(transverse_curvature_ratio(kParams, 2.87e9 / 28.0 + 1.0), SingularityError);
    CHECK_THROWS_AS(transverse_curvature_ratio(kParams, 2.0e8), InvalidInput);
    CHECK_THROWS_AS(transverse_curvature_ratio(kParams, 0.0), InvalidInput);
}

TEST_CASE("rotating-frame Hamiltonian") {
    CHECK(rotating_hamiltonian({}).matrix.isZero());

    DriveParams d{1e6, 2e6, 3e3, 1e3, 0.0, 0.0};
    const BasisMatrix h = rotating_hamiltonian(d);
    CHECK(h.basis == Basis::rotating);
    CHECK(h(Level::plus, Level::zero).real() == 1e6);
    CHECK(h(Level::zero, Level::minus).real() == 2e6);
    CHECK(h(Level::plus, Level::minus) == cplx(0.0));
    CHECK(h(Level::zero, Level::zero).real() == 6e3);
    CHECK(h(Level::minus, Level::minus).real() == 4e3);
    CHECK(h(Level::plus, Level::plus).real() == 0.0);
    CHECK((h.matrix - h.matrix.transpose()).isZero());

    DriveParams equal{0.0, 0.0, 5e6, 5e6, 0.0, 0.0};
    const auto he = rotating_hamiltonian(equal).matrix;
    CHECK(he(0, 0).real() == 0.0);
    CHECK(he(1, 1).real() == 1e7);
    CHECK(he(2, 2).real() == 0.0);

    // Linear in each amplitude.
    DriveParams twice = d;
    twice.omega_plus *= 2.0;
    const auto diff = rotating_hamiltonian(twice).matrix - h.matrix;
    CHECK(diff(0, 1).real() == 1e6);

    DriveParams negative;
    negative.omega_minus = -1.0;
    CHECK_THROWS_AS(rotating_hamiltonian(negative), InvalidInput);
}

TEST_CASE("two-photon detuning and delta_s") {
    CHECK(two_photon_detuning(0, 0, 0, kParams) == 0.0);
    CHECK(two_photon_detuning(1e3, 0, 0, kParams) == 1e3);
    CHECK(two_photon_detuning(0, 0, 10.0, kParams) == -560.0);
    CHECK(delta_s(Level::zero, Level::minus) == 1);
    CHECK(delta_s(Level::minus, Level::plus) == 2);
    CHECK_THROWS_AS(delta_s(Level::zero, Level::zero), InvalidInput);
}

TEST_CASE("spin state normalization and basis conversion") {
    CHECK_THROWS_AS(SpinState(Eigen::Vector3cd(1.0, 1.0, 0.0)), InvalidInput);
    const SpinState s = SpinState::normalized(Eigen::Vector3cd(1.0, cplx(0.0, 1.0), 0.0));
    CHECK(s.norm() == doctest::Approx(1.0));
    CHECK(s.population(Level::plus) == doctest::Approx(0.5));

    const Eigen::Vector3cd rot = s.in_basis(Basis::rotating);
    CHECK(rot(0) == s.amplitude(Level::plus));
    CHECK(rot(1) == s.amplitude(Level::zero));
    const SpinState back = SpinState::from_basis(Basis::rotating, rot);
    CHECK(back.amplitudes() == s.amplitudes());
    CHECK(level_at(Basis::rotating, 2) == Level::minus);
    CHECK(parse_level("-1") == Level::minus);
    CHECK(to_string(Level::plus) == "+1");
}
