#include "sbbts/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace sbbts::log {
namespace {
std::atomic<bool> g_quiet{false};
std::atomic<bool> g_verbose{false};
std::atomic<long> g_warnings{0};
std::mutex g_mutex;
}  // namespace

void warn(std::string_view message) {
  ++g_warnings;
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[warn] " << message << '\n';
}

void info(std::string_view message) {
  if (!g_verbose) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[info] " << message << '\n';
}

void set_quiet(bool quiet) { g_quiet = quiet; }
void set_verbose(bool verbose) { g_verbose = verbose; }
bool verbose() { return g_verbose; }
long warning_count() { return g_warnings; }

}  // namespace sbbts::log
