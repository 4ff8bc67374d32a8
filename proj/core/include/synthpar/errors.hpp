#pragma once

#include <stdexcept>
#include <string>

namespace synthpar {

/// Base of every error raised by the library. Each subclass names one failure
/// class so callers (and the CLI exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or record (distinct from an invariant violation).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad or missing configuration, including HTTP 4xx from a backend.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Network failure that survived every retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

class EmptyOutputError : public Error {
 public:
  using Error::Error;
};

/// Backend cannot serve the requested language direction.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class PoolExhaustedError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before its inputs exist.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An external hook produced output that does not match its line protocol.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class UndefinedInputError : public Error {
 public:
  using Error::Error;
};

/// Run-level failure, e.g. too many back-translation failures.
class RunError : public Error {
 public:
  using Error::Error;
};

/// The external trainer exited non-zero; round state is left on disk.
class TrainerError : public Error {
 public:
  using Error::Error;
};

}  // namespace synthpar
