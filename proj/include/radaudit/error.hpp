#pragma once

#include <stdexcept>
#include <string>

namespace radaudit {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, unknown tokens.
class InputError : public Error {
 public:
  using Error::Error;
};

// A metric that has no value on the given data (single-class AUROC, zero
// positives for AP, ...). Never silently replaced by a default.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// A pluggable backend (generator, auditor, summarizer) failed.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace radaudit
