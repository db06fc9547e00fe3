#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace trajguide {

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Receives non-fatal diagnostics ("empty warp", reduced pyramid levels, ...).
using WarningHandler = std::function<void(const std::string&)>;

/// Installs a process-wide warning handler and returns the previous one.
/// Passing an empty handler restores the default (stderr, deduplicated).
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

}  // namespace trajguide
