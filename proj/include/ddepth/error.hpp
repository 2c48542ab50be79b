#pragma once

#include <stdexcept>
#include <string>

namespace ddepth {

/// Bad arguments, malformed inputs, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable/unwritable files and truncated streams.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace ddepth
