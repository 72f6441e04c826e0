#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace casegraph {

// Error categories shared by every module. The CLI maps them to exit codes.
enum class ErrorKind {
  Domain,      // numeric input outside an operation's domain
  Shape,       // tensor or vector extents disagree
  Usage,       // API misuse (wrong tape, empty input where forbidden)
  Manifest,    // dataset manifest is inconsistent
  Parse,       // malformed file contents
  Validation,  // structurally parsed but violates an invariant
  Format,      // binary container header/payload mismatch
  Lookup,      // unknown node or key
  Retrieval,   // index cannot answer a query
  Data,        // missing embedding or other data dependency
  Config,      // configuration out of range
  Cache,       // missing cached subgraph
  Training,    // non-finite loss and similar
  Metric,      // metric undefined for the given inputs
  Io,          // file system failure
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace casegraph
