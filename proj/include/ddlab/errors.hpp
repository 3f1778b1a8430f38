#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

/// Bad arguments: non-finite data, mismatched dimensions, unknown names.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the mathematical domain of an operation (e.g. n >= d for the lambda solver).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// The requested background measure is not supported by an exact routine.
class UnsupportedMeasure : public std::invalid_argument {
public:
    explicit UnsupportedMeasure(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed to converge or produced a non-finite result.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ddlab
