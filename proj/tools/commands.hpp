#pragma once

#include "run_config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bsrg::cli {

enum ExitCode : int { kPass = 0, kViolation = 1, kUsage = 2, kInconclusive = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> budget;
  std::optional<std::string> out;
  std::optional<int> samples;
  std::vector<std::string> kinds;  // scaling only; "all" expands to every kind
};

// Each command writes its CSV files and <command>_manifest.json into the output
// directory and returns an ExitCode. Usage problems throw UsageError/ValidationError.
int cmd_verify_bounds(const RunConfig& cfg, const Overrides& o, std::ostream& log);
int cmd_stokes(const RunConfig& cfg, const Overrides& o, std::ostream& log);
int cmd_scaling(const RunConfig& cfg, const Overrides& o, std::ostream& log);
int cmd_rg_step(const RunConfig& cfg, const Overrides& o, std::ostream& log);
int cmd_export_operators(const RunConfig& cfg, const Overrides& o, std::ostream& log);

// Hash of the config together with the command-line overrides.
std::string effective_config_hash(const RunConfig& cfg, const Overrides& o);

}  // namespace bsrg::cli
