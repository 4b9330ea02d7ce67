#pragma once

#include <stdexcept>
#include <string>

namespace tsc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Singular potential evaluated outside (r-, r+).
class SingularDomain : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class BadBounds : public Error {
public:
    using Error::Error;
};

class BoundsNotSigned : public Error {
public:
    using Error::Error;
};

class BisectionFailure : public Error {
public:
    using Error::Error;
};

class NewtonDivergence : public Error {
public:
    NewtonDivergence(int step, const std::string& what)
        : Error("Newton divergence at step " + std::to_string(step) + ": " + what), step_(step)
    {
    }
    int step() const noexcept { return step_; }

private:
    int step_;
};

/// The phase field came within the clamping margin of r- or r+.
class SeparationLoss : public Error {
public:
    SeparationLoss(int step, double margin)
        : Error("separation lost at step " + std::to_string(step) + " (margin " +
                std::to_string(margin) + ")"),
          step_(step), margin_(margin)
    {
    }
    int step() const noexcept { return step_; }
    double margin() const noexcept { return margin_; }

private:
    int step_;
    double margin_;
};

class StepsizeCollapse : public Error {
public:
    using Error::Error;
};

class DimensionTooLarge : public Error {
public:
    using Error::Error;
};

} // namespace tsc
