#include "nvmag/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvmag/error.hpp"

namespace nvmag {

namespace {

constexpr double kNormTolerance = 1e-10;
constexpr double kOverlapTieTolerance = 1e-9;
constexpr double kAntiCrossingWindow = 1e6;  // Hz

void require_finite(double value, const char* name) {
    if (!std::isfinite(value)) throw InvalidInput(std::string(name) + " must be finite");
}

void require_positive(double value, const char* name) {
    require_finite(value, name);
    if (value <= 0.0) throw InvalidInput(std::string(name) + " must be strictly positive");
}

std::array<double, 3> absolute_energies(const LevelDiagram& d) {
    return {d.energy(Level::zero), d.energy(Level::plus), d.energy(Level::minus)};
}

// |+-1> block with |0> decoupled (B_perp == 0). The block is
//   [[m + z, w], [w*, m - z]],  z = g Bz, w = d_perp (Ex + i Ey)
// with eigenvalues m +- hypot(z, |w|).
LevelDiagram decoupled_levels(const GroundStateParams& p, const EnvironmentFields& env) {
    const double mean = p.d_g + p.d_parallel * env.e_z;
    const double zeeman = p.gyromag * env.b_z;
    const double mixing = p.d_perp * std::hypot(env.e_x, env.e_y);

    LevelDiagram d;
    d.reference = mean;
    d.offsets[slot(Level::zero)] = -mean;
    if (mixing == 0.0) {
        d.offsets[slot(Level::plus)] = zeeman;
        d.offsets[slot(Level::minus)] = -zeeman;
        return d;
    }
    const double r = std::hypot(zeeman, mixing);
    // Overlap of the upper eigenvector with |+1> is (1 + z/r)/2.
    if (std::abs(zeeman) <= kOverlapTieTolerance * r) {
        d.offsets[slot(Level::plus)] = r;
        d.offsets[slot(Level::minus)] = -r;
        throw DegeneracyError("|+1> and |-1> are equally mixed by transverse strain at Bz = 0",
                              absolute_energies(d));
    }
    const double sign = zeeman > 0.0 ? 1.0 : -1.0;
    d.offsets[slot(Level::plus)] = sign * r;
    d.offsets[slot(Level::minus)] = -sign * r;
    return d;
}

LevelDiagram diagonalized_levels(const GroundStateParams& p, const EnvironmentFields& env) {
    const double mean = p.d_g + p.d_parallel * env.e_z;
    Eigen::Matrix3cd shifted = ground_hamiltonian(p, env).matrix;
    shifted -= mean * Eigen::Matrix3cd::Identity();

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> solver(shifted);
    if (solver.info() != Eigen::Success) throw Error("ground-state diagonalization failed");
    const Eigen::Vector3d& values = solver.eigenvalues();
    const Eigen::Matrix3cd& vectors = solver.eigenvectors();

    LevelDiagram d;
    d.reference = mean;
    std::array<bool, 3> taken{};
    bool ambiguous = false;
    for (Eigen::Index k = 0; k < 3; ++k) {
        std::array<double, 3> overlap{};
        for (Eigen::Index i = 0; i < 3; ++i) overlap[static_cast<std::size_t>(i)] = std::norm(vectors(i, k));
        const auto best = static_cast<std::size_t>(std::max_element(overlap.begin(), overlap.end()) - overlap.begin());
        std::array<double, 3> rest = overlap;
        rest[best] = -1.0;
        const double runner_up = *std::max_element(rest.begin(), rest.end());
        if (overlap[best] - runner_up < kOverlapTieTolerance || taken[best]) ambiguous = true;
        taken[best] = true;
        d.offsets[best] = values(k);
    }
    if (ambiguous) {
        std::array<double, 3> energies{};
        for (Eigen::Index k = 0; k < 3; ++k) energies[static_cast<std::size_t>(k)] = mean + values(k);
        throw DegeneracyError("eigenvector labeling by maximal overlap is ambiguous", energies);
    }
    return d;
}

}  // namespace

std::string_view to_string(Level level) {
    switch (level) {
        case Level::zero: return "0";
        case Level::plus: return "+1";
        case Level::minus: return "-1";
    }
    return "?";
}

std::optional<Level> parse_level(std::string_view text) {
    if (text == "0") return Level::zero;
    if (text == "+1" || text == "1" || text == "plus") return Level::plus;
    if (text == "-1" || text == "minus") return Level::minus;
    return std::nullopt;
}

void GroundStateParams::validate() const {
    require_positive(d_g, "d_g");
    require_positive(d_parallel, "d_parallel");
    require_positive(d_perp, "d_perp");
    require_positive(gyromag, "gyromag");
}

void EnvironmentFields::validate() const {
    require_finite(b_x, "b_x");
    require_finite(b_y, "b_y");
    require_finite(b_z, "b_z");
    require_finite(e_x, "e_x");
    require_finite(e_y, "e_y");
    require_finite(e_z, "e_z");
}

void DriveParams::validate() const {
    require_finite(omega_plus, "omega_plus");
    require_finite(omega_minus, "omega_minus");
    require_finite(delta_plus, "delta_plus");
    require_finite(delta_minus, "delta_minus");
    require_finite(phase_plus, "phase_plus");
    require_finite(phase_minus, "phase_minus");
    if (omega_plus < 0.0 || omega_minus < 0.0) throw InvalidInput("Rabi amplitudes must be non-negative");
}

SpinState::SpinState(const Eigen::Vector3cd& amplitudes) : amplitudes_(amplitudes) {
    if (!amplitudes.allFinite()) throw InvalidInput("spin state amplitudes must be finite");
    const double n2 = amplitudes.squaredNorm();
    if (std::abs(n2 - 1.0) > kNormTolerance) {
        std::ostringstream msg;
        msg << "spin state is not normalized (|psi|^2 = " << n2 << ")";
        throw InvalidInput(msg.str());
    }
}

SpinState SpinState::basis_state(Level level) {
    Eigen::Vector3cd v = Eigen::Vector3cd::Zero();
    v(static_cast<Eigen::Index>(slot(level))) = 1.0;
    return SpinState(v);
}

SpinState SpinState::normalized(const Eigen::Vector3cd& amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("cannot normalize a zero or non-finite state");
    return SpinState(amplitudes / n);
}

SpinState SpinState::from_basis(Basis basis, const Eigen::Vector3cd& amplitudes) {
    Eigen::Vector3cd canonical;
    for (Level l : kLevels)
        canonical(static_cast<Eigen::Index>(slot(l))) = amplitudes(static_cast<Eigen::Index>(index_of(basis, l)));
    return SpinState(canonical);
}

Populations SpinState::populations() const {
    Populations p;
    for (Level l : kLevels) p[l] = population(l);
    return p;
}

Eigen::Vector3cd SpinState::in_basis(Basis basis) const {
    Eigen::Vector3cd out;
    for (Level l : kLevels)
        out(static_cast<Eigen::Index>(index_of(basis, l))) = amplitudes_(static_cast<Eigen::Index>(slot(l)));
    return out;
}

SpinState unchecked_state(const Eigen::Vector3cd& amplitudes) {
    return SpinState(amplitudes, SpinState::Unchecked{});
}

BasisMatrix ground_hamiltonian(const GroundStateParams& params, const EnvironmentFields& env) {
    params.validate();
    env.validate();
    const double g = params.gyromag;
    const cplx beta_perp = cplx(-env.b_y, env.b_x) / std::sqrt(2.0);
    const cplx strain = params.d_perp * cplx(env.e_x, env.e_y);

    Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
    h(0, 1) = g * beta_perp;
    h(0, 2) = g * std::conj(beta_perp);
    h(1, 0) = std::conj(h(0, 1));
    h(2, 0) = std::conj(h(0, 2));
    h(1, 1) = params.d_g + params.d_parallel * env.e_z + g * env.b_z;
    h(2, 2) = params.d_g + params.d_parallel * env.e_z - g * env.b_z;
    h(1, 2) = strain;
    h(2, 1) = std::conj(strain);
    return {h, Basis::ground};
}

LevelDiagram level_energies(const GroundStateParams& params, const EnvironmentFields& env) {
    params.validate();
    env.validate();
    if (env.b_x == 0.0 && env.b_y == 0.0) return decoupled_levels(params, env);
    return diagonalized_levels(params, env);
}

double transition_frequency(const LevelDiagram& diagram, Level a, Level b) {
    if (a == b) throw InvalidInput("transition requires two distinct levels");
    return std::abs(diagram.difference(a, b));
}

double transverse_curvature_ratio(const GroundStateParams& params, double b_z, TransverseAxis axis) {
    params.validate();
    if (!std::isfinite(b_z) || b_z <= 0.0) throw InvalidInput("b_z must be positive");
    const double zeeman = params.gyromag * b_z;
    if (std::abs(zeeman - params.d_g) < kAntiCrossingWindow)
        throw SingularityError("bias field sits at the |0>/|-1> level anti-crossing");
    if (zeeman >= params.d_g) throw InvalidInput("g muB b_z must be below d_g");

    // Transverse coupling small against the nearest gap, large against round-off.
    const double gap = params.d_g - zeeman;
    const double h = 1e-3 * gap / params.gyromag;

    auto frequencies = [&](double b_perp) {
        EnvironmentFields env;
        env.b_z = b_z;
        (axis == TransverseAxis::x ? env.b_x : env.b_y) = b_perp;
        const LevelDiagram d = level_energies(params, env);
        return std::array<double, 2>{d.difference(Level::minus, Level::zero),
                                     d.difference(Level::plus, Level::minus)};
    };
    const auto f0 = frequencies(0.0);
    auto curvature = [&](double step) {
        const auto fp = frequencies(step);
        const auto fm = frequencies(-step);
        return std::array<double, 2>{(fp[0] - 2.0 * f0[0] + fm[0]) / (step * step),
                                     (fp[1] - 2.0 * f0[1] + fm[1]) / (step * step)};
    };
    // Richardson extrapolation removes the O(h^2) term of the central difference.
    const auto coarse = curvature(h);
    const auto fine = curvature(0.5 * h);
    const double c01 = (4.0 * fine[0] - coarse[0]) / 3.0;
    const double cpm = (4.0 * fine[1] - coarse[1]) / 3.0;
    if (cpm == 0.0) throw SingularityError("|-1>/|+1> transition has zero transverse curvature");
    return std::abs(c01) / std::abs(cpm);
}

BasisMatrix rotating_hamiltonian(const DriveParams& drive) {
    drive.validate();
    const cplx w_plus = std::polar(drive.omega_plus, drive.phase_plus);
    const cplx w_minus = std::polar(drive.omega_minus, drive.phase_minus);
    Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
    h(0, 1) = w_plus;
    h(1, 0) = std::conj(w_plus);
    h(1, 2) = w_minus;
    h(2, 1) = std::conj(w_minus);
    h(1, 1) = 2.0 * drive.delta_plus;
    h(2, 2) = 2.0 * (drive.delta_plus - drive.delta_minus);
    return {h, Basis::rotating};
}

double two_photon_detuning(double delta_plus, double delta_minus, double delta_bz,
                           const GroundStateParams& params) {
    return delta_plus - delta_minus - 2.0 * params.gyromag * delta_bz;
}

int delta_s(Level a, Level b) {
    if (a == b) throw InvalidInput("transition requires two distinct levels");
    auto m = [](Level l) { return l == Level::plus ? 1 : (l == Level::minus ? -1 : 0); };
    return std::abs(m(a) - m(b));
}

}  // namespace nvmag
