#pragma once

#include <string>

namespace cssl::log {

// Global quiet flag, set once by the CLI from --quiet. Warnings go to stderr
// so they never corrupt machine-readable stdout.
void set_quiet(bool quiet);
bool quiet();

void warn(const std::string& message);
void info(const std::string& message);

}  // namespace cssl::log
