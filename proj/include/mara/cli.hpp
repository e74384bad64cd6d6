#pragma once

// Command-line front end. Every command writes its tables and a manifest.json
// into --out (created if needed). Options can also come from a flat
// `key = value` file given with --config; keys are the long option names
// without dashes. Precedence: command line, then config file, then default.

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mara/config.hpp"

namespace mara::cli {

/// Runs one invocation; args exclude the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// What a command records about itself in <out>/manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;  // resolved option values
  unsigned long long seed = 0;
  std::vector<std::string> artifacts;         // file names relative to the output directory
  std::string started, finished;              // UTC, ISO 8601

  std::string to_json() const;
};

/// Writes <dir>/manifest.json, replacing any earlier one.
void write_manifest(const std::string& dir, const RunManifest& m);

/// A structure argument: `path.xyz` (first frame, or `path.xyz@k` for frame k)
/// or `synth:morse` / `synth:trimer` for the minimum-energy geometry of the
/// synthetic potential.
AtomicConfiguration load_system(const std::string& spec);

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
/// Throws ParseError with the line number on a line without `=`.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_now();

}  // namespace mara::cli
