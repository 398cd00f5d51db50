#pragma once

#include <stdexcept>
#include <string>

namespace stsnn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, layer/stream configuration or config-file content.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input data (frames, tensors, binary files).
class IngestError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

/// Mismatched dimensions or lengths between operands.
class InputError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class FusionError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was asked to consume an artifact that does not exist yet.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& artifact, const std::string& producer)
      : Error("missing artifact '" + artifact + "'; produce it with `" + producer + "`"),
        producer_(producer) {}

  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

}  // namespace stsnn
