#pragma once

#include <stdexcept>
#include <string>

namespace speclab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (mesh files, torus specs, config files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Mesh violates a closed-surface invariant.
class MeshError : public Error {
public:
    using Error::Error;
};

/// Metric violates positivity or the triangle inequality.
class MetricError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Iterative eigensolver failed to converge.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Metric flow could not take an admissible step.
class FlowAbort : public Error {
public:
    using Error::Error;
};

} // namespace speclab
