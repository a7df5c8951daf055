#include "skeletor/error.hpp"

namespace skeletor {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::structural: return "structural";
    case ErrorKind::degenerate_geometry: return "degenerate_geometry";
    case ErrorKind::invalid_state: return "invalid_state";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

}  // namespace skeletor
