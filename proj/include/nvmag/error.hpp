// error.hpp: exception hierarchy shared by all nvmag modules.

#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace nvmag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Two eigenvectors claim the same unperturbed basis label.
class DegeneracyError : public Error {
public:
    DegeneracyError(const std::string& what, std::array<double, 3> eigenvalues)
        : Error(what), eigenvalues_(eigenvalues) {}

    const std::array<double, 3>& eigenvalues() const noexcept { return eigenvalues_; }

private:
    std::array<double, 3> eigenvalues_;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

/// Adaptive step fell below the minimum step size.
class StiffnessError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Observed counts are impossible everywhere on the calibration branch.
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

}  // namespace nvmag
