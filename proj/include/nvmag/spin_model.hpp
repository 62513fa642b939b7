// spin_model.hpp: NV ground-state constants, the lab-frame and rotating-frame
// Hamiltonians, and exact level/transition computations.
//
// Units: frequencies in linear Hz, magnetic fields in nT, electric field
// (strain-equivalent) in V/m. Nothing here multiplies by 2*pi; the propagator
// does that once when exponentiating.

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace nvmag {

using cplx = std::complex<double>;

/// Spin projection m_s of the ground-state triplet.
enum class Level { zero, plus, minus };

inline constexpr std::array<Level, 3> kLevels{Level::zero, Level::plus, Level::minus};

/// Position of a level in the canonical {|0>, |+1>, |-1>} ordering.
constexpr std::size_t slot(Level level) { return static_cast<std::size_t>(level); }

std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view text);

/// Matrix bases used by the two Hamiltonians.
///   ground   : {|0>, |+1>, |-1>}  (lab-frame ground-state Hamiltonian)
///   rotating : {|+1>, |0>, |-1>}  (two-tone rotating-frame Hamiltonian)
enum class Basis { ground, rotating };

constexpr std::size_t index_of(Basis basis, Level level) {
    if (basis == Basis::ground) return slot(level);
    switch (level) {
        case Level::plus: return 0;
        case Level::zero: return 1;
        case Level::minus: return 2;
    }
    return 0;
}

constexpr Level level_at(Basis basis, std::size_t index) {
    for (Level l : kLevels)
        if (index_of(basis, l) == index) return l;
    return Level::zero;
}

struct GroundStateParams {
    double d_g = 2.87e9;         ///< zero-field splitting, Hz
    double d_parallel = 3.5e-2;  ///< axial electric dipole, Hz m/V
    double d_perp = 0.17;        ///< transverse electric dipole, Hz m/V
    double gyromag = 28.0;       ///< g*muB, Hz/nT

    void validate() const;
};

struct EnvironmentFields {
    double b_x = 0.0, b_y = 0.0, b_z = 0.0;  ///< nT
    double e_x = 0.0, e_y = 0.0, e_z = 0.0;  ///< V/m

    void validate() const;
};

/// Instantaneous two-tone drive. Amplitudes and detunings in Hz; the optional
/// phases (rad) make the couplings complex.
struct DriveParams {
    double omega_plus = 0.0;
    double omega_minus = 0.0;
    double delta_plus = 0.0;
    double delta_minus = 0.0;
    double phase_plus = 0.0;
    double phase_minus = 0.0;

    void validate() const;
};

/// A 3x3 operator together with the basis its rows/columns refer to.
struct BasisMatrix {
    Eigen::Matrix3cd matrix;
    Basis basis;

    cplx operator()(Level row, Level col) const {
        return matrix(static_cast<Eigen::Index>(index_of(basis, row)),
                      static_cast<Eigen::Index>(index_of(basis, col)));
    }
};

/// Per-level values in canonical order.
struct Populations {
    std::array<double, 3> values{};

    double operator[](Level l) const { return values[slot(l)]; }
    double& operator[](Level l) { return values[slot(l)]; }
    double sum() const { return values[0] + values[1] + values[2]; }
};

/// Normalized amplitude triple, stored in canonical {|0>, |+1>, |-1>} order.
class SpinState {
public:
    /// Throws InvalidInput unless the norm is 1 within 1e-10.
    explicit SpinState(const Eigen::Vector3cd& amplitudes);

    static SpinState basis_state(Level level);

    /// Accepts any vector and rescales it to unit norm.
    static SpinState normalized(const Eigen::Vector3cd& amplitudes);

    /// Builds a state from amplitudes in the given basis order.
    static SpinState from_basis(Basis basis, const Eigen::Vector3cd& amplitudes);

    cplx amplitude(Level l) const { return amplitudes_(static_cast<Eigen::Index>(slot(l))); }
    double population(Level l) const { return std::norm(amplitude(l)); }
    Populations populations() const;
    double norm() const { return amplitudes_.norm(); }

    const Eigen::Vector3cd& amplitudes() const { return amplitudes_; }
    Eigen::Vector3cd in_basis(Basis basis) const;

private:
    struct Unchecked {};
    SpinState(const Eigen::Vector3cd& amplitudes, Unchecked) : amplitudes_(amplitudes) {}
    friend SpinState unchecked_state(const Eigen::Vector3cd&);

    Eigen::Vector3cd amplitudes_;
};

/// Wraps amplitudes without the normalization check (propagator internals;
/// drift from 1 is bounded by the integration tolerance).
SpinState unchecked_state(const Eigen::Vector3cd& amplitudes);

/// Level energies, labeled by dominant unperturbed basis state.
///
/// Energies are held as a common reference plus per-level offsets so that
/// splittings within the |+-1> manifold do not suffer cancellation against
/// the 2.87 GHz zero-field splitting.
struct LevelDiagram {
    double reference = 0.0;
    std::array<double, 3> offsets{};  ///< canonical order

    double energy(Level l) const { return reference + offsets[slot(l)]; }
    /// E(a) - E(b), computed from offsets.
    double difference(Level a, Level b) const { return offsets[slot(a)] - offsets[slot(b)]; }
};

BasisMatrix ground_hamiltonian(const GroundStateParams& params, const EnvironmentFields& env);

LevelDiagram level_energies(const GroundStateParams& params, const EnvironmentFields& env);

/// |E(a) - E(b)|. Throws InvalidInput when a == b.
double transition_frequency(const LevelDiagram& diagram, Level a, Level b);

enum class TransverseAxis { x, y };

/// Ratio of the transverse-field curvature of the {0,-1} transition to that
/// of the {-1,+1} transition at B_perp = 0, both taken as magnitudes.
double transverse_curvature_ratio(const GroundStateParams& params, double b_z,
                                  TransverseAxis axis = TransverseAxis::x);

/// Rotating-frame two-tone Hamiltonian in Basis::rotating:
///   [[0, W+, 0], [W+*, 2D+, W-], [0, W-*, 2(D+ - D-)]],  W = omega * exp(i phase).
BasisMatrix rotating_hamiltonian(const DriveParams& drive);

/// Delta_+ - Delta_- - 2 g muB dBz, in Hz.
double two_photon_detuning(double delta_plus, double delta_minus, double delta_bz,
                           const GroundStateParams& params);

/// Magnetic quantum number difference of a transition (1 or 2).
int delta_s(Level a, Level b);

}  // namespace nvmag
