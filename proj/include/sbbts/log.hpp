#pragma once

#include <string_view>

namespace sbbts::log {

/// Emits a warning line on stderr unless warnings are silenced.
void warn(std::string_view message);

/// Informational line on stderr, only when verbose output is enabled.
void info(std::string_view message);

void set_quiet(bool quiet);
void set_verbose(bool verbose);
bool verbose();

/// Number of warnings emitted since process start (silenced ones included).
long warning_count();

}  // namespace sbbts::log
