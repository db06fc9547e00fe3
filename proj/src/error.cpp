#include "trajguide/error.hpp"

#include <iostream>
#include <mutex>
#include <set>

namespace trajguide {
namespace {

std::mutex g_mutex;
WarningHandler g_handler;
std::set<std::string> g_seen;

void default_handler(const std::string& message) {
  // Dedup so per-step warnings inside sampling loops print once.
  if (g_seen.insert(message).second) {
    std::cerr << "trajguide: warning: " << message << '\n';
  }
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_mutex);
  auto previous = std::move(g_handler);
  g_handler = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (g_handler) {
    g_handler(message);
  } else {
    default_handler(message);
  }
}

}  // namespace trajguide
