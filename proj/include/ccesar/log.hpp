#pragma once

#include <spdlog/logger.h>

namespace ccesar {

/// Shared stderr logger ("ccesar"). Level defaults to info; the CLI adjusts it.
spdlog::logger& logger();

}  // namespace ccesar
