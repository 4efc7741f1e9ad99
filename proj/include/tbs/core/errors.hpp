#pragma once

#include <stdexcept>
#include <string>

namespace tbs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

// Raised when a value table picks up NaN/inf during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or stale upstream artifact. Carries the stage that must be rerun.
class ArtifactError : public Error {
 public:
  ArtifactError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace tbs
