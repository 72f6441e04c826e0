#pragma once

#include <string_view>

namespace casegraph {

inline constexpr std::string_view kCodeVersion = "casegraph 0.1.0";

}  // namespace casegraph
