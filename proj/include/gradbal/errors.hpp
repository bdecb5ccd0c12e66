#pragma once

#include <stdexcept>
#include <string>

namespace gradbal {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, shapes or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range argument to a pure function (e.g. scheduler step).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in an input or an intermediate activation.
class NumericFault : public Error {
 public:
  NumericFault(std::string layer, const std::string& what)
      : Error("numeric fault in " + layer + ": " + what), layer_(std::move(layer)) {}
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

/// A tape was replayed after the parameters it recorded were mutated.
class StaleTape : public Error {
 public:
  using Error::Error;
};

/// An objective was handed to a tape that did not produce it.
class InvalidHandle : public Error {
 public:
  using Error::Error;
};

/// Class label outside [0, K).
class LabelError : public Error {
 public:
  using Error::Error;
};

class EmptyBatch : public Error {
 public:
  using Error::Error;
};

/// Inconsistent presence flags between class losses and weights.
class ContractError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

class GeneratorError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

/// File-system or format error; the message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradbal
