#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skeletor {

enum class ErrorKind {
  structural,          // joint counts or tree layouts disagree
  degenerate_geometry, // e.g. every limb has zero length
  invalid_state,
  shape,
  numerical,           // NaN/Inf or divergence
  config,
  io,
  parse,
  usage,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace skeletor

// Like require(), but the message is only built when the check fails. Used on
// hot paths where messages are assembled from shapes.
#define SKELETOR_CHECK(condition, kind, ...)                  \
  do {                                                        \
    if (!(condition)) ::skeletor::fail((kind), __VA_ARGS__);  \
  } while (false)
