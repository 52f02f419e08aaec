#pragma once

#include <stdexcept>
#include <string>

namespace boundedgeo {

// Base class of every error the library raises. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Expression or config text could not be parsed; `position` is a 0-based byte offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class DegenerateMetric : public Error {
public:
    using Error::Error;
};

class DegenerateSlab : public Error {
public:
    using Error::Error;
};

class NoDirichletFace : public Error {
public:
    using Error::Error;
};

class ChartInversionFailure : public Error {
public:
    using Error::Error;
};

class CoverageGap : public Error {
public:
    using Error::Error;
};

// CG met a search direction with p^T A p <= 0.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace boundedgeo
