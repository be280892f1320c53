#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace rau {

// Thrown for every recoverable failure in the library: bad input files,
// violated preconditions, shape mismatches.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename... Args>
inline void require(bool condition, Args&&... message) {
  if (!condition) {
    throw Error(detail::concat(std::forward<Args>(message)...));
  }
}

}  // namespace rau
