#pragma once

#include <functional>
#include <string_view>

namespace scitag::log {

using Sink = std::function<void(std::string_view)>;

/// Replaces the warning sink (stderr by default); returns the previous one.
Sink setWarningSink(Sink sink);
void warn(std::string_view message);

}  // namespace scitag::log
