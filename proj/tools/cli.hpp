#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "degenheat/wf_solver.hpp"

namespace degenheat::cli {

/// Parsed `key = value` file. Keys before the first `[section]` header live in section "".
struct ConfigFile {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string source;
  std::map<std::string, std::map<std::string, Entry>> sections;

  /// Looks the key up in `section`, then its dotted parents, then the global section.
  const Entry* find(const std::string& section, const std::string& key) const;
};

ConfigFile read_config(std::istream& is, const std::string& source);

/// `b0=..,b1=..` (mutation), `mu12=..,mu21=..[,s=..]` (genetics) or `c0=..,c1=..,...` (polynomial).
wf::DriftSpec parse_drift(const std::string& text);

/// Threads allowed by DEGENHEAT_THREADS (unset: hardware concurrency).
int thread_cap();

/// Runs the command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace degenheat::cli
