#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace gdraw {

// All library failures surface as gdraw::Error with a one-line message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  throw Error(oss.str());
}

}  // namespace detail

}  // namespace gdraw
