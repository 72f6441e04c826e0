#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "casegraph/error.hpp"

namespace casegraph::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;

int exit_code(ErrorKind kind) noexcept;

// Parses and runs one subcommand. Progress goes to `out`; failures print a
// single "error [category]: message" line to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace casegraph::cli
