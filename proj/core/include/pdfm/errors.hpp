#pragma once

#include <stdexcept>
#include <string>

namespace pdfm {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input fails a documented precondition (out-of-range coordinate, empty set, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shape or column mismatch between two aligned structures.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Unknown id or key.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Referential-integrity failure while joining tables by region id.
class JoinError : public Error {
 public:
  using Error::Error;
};

/// Graph assembly rejected an invariant violation.
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Metric undefined for the given inputs.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or an optimizer failed to converge.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was run against missing or out-of-date upstream artifacts.
class StaleArtifactError : public Error {
 public:
  using Error::Error;
};

/// The benchmark data-access layer refused a label read that the split
/// protocol forbids (e.g. postal-level labels while training super-resolution).
class AccessError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdfm
