#include "cssl/log.hpp"

#include <iostream>

namespace cssl::log {

namespace {
bool g_quiet = false;
}

void set_quiet(bool quiet) { g_quiet = quiet; }
bool quiet() { return g_quiet; }

void warn(const std::string& message) {
  if (!g_quiet) std::cerr << "warning: " << message << "\n";
}

void info(const std::string& message) {
  if (!g_quiet) std::cerr << message << "\n";
}

}  // namespace cssl::log
