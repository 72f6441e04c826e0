#include "casegraph/error.hpp"

namespace casegraph {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Manifest: return "manifest error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Lookup: return "lookup error";
    case ErrorKind::Retrieval: return "retrieval error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Cache: return "cache error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Metric: return "metric error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

}  // namespace casegraph
