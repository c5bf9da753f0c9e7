#ifndef WCAM_ERRORS_HPP
#define WCAM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wcam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array dimensions incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A configuration or argument value outside its documented domain.
class InvalidParam : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class InvalidSubband : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure reported by (or while talking to) a scoring backend.
///
/// `batch_index()` identifies the offending batch in the caller's numbering;
/// it is -1 when the failure is not tied to a batch.
class ScorerError : public Error {
 public:
  enum class Kind { Transport, Protocol, NonFinite };

  ScorerError(Kind kind, const std::string& what, long batch_index = -1)
      : Error(std::string(kind_name(kind)) + ": " + what),
        kind_(kind),
        batch_index_(batch_index) {}

  Kind kind() const noexcept { return kind_; }
  long batch_index() const noexcept { return batch_index_; }

  ScorerError with_batch(long batch_index) const {
    ScorerError copy = *this;
    copy.batch_index_ = batch_index;
    return copy;
  }

  static const char* kind_name(Kind kind) noexcept {
    switch (kind) {
      case Kind::Transport: return "transport";
      case Kind::Protocol: return "protocol";
      case Kind::NonFinite: return "non_finite";
    }
    return "unknown";
  }

 private:
  Kind kind_;
  long batch_index_;
};

}  // namespace wcam

#endif  // WCAM_ERRORS_HPP
