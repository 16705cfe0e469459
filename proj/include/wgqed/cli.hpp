#pragma once

// Subcommands behind the wgqed executable. Each command returns its output
// files in memory; run_cli writes them and the run manifest.

#include "wgqed/config.hpp"
#include "wgqed/polarization.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace wgqed {

struct Artifact {
  std::string name;  ///< file name inside the output directory
  std::string content;
};

struct CommandResult {
  std::vector<Artifact> files;
  std::string summary;  ///< human-readable, printed to stdout

  const Artifact& file(const std::string& name) const;
};

CommandResult cmd_g2(const ExperimentConfig& config, unsigned threads = 0);
CommandResult cmd_lifetime(const ExperimentConfig& config, unsigned threads = 0);
CommandResult cmd_steadystate_map(const ExperimentConfig& config, unsigned threads = 0);
CommandResult cmd_waveplate_map(const ExperimentConfig& config, unsigned threads = 0);
CommandResult cmd_rabi(const ExperimentConfig& config, unsigned threads = 0);
CommandResult cmd_fit(const ExperimentConfig& config, unsigned threads = 0);

/// Dispatches by subcommand name ("g2", "lifetime", "steadystate-map",
/// "waveplate-map", "rabi", "fit").
CommandResult run_command(const std::string& name, const ExperimentConfig& config, unsigned threads = 0);

/// Rebuilds a contour from the contour CSV written by waveplate-map.
EqualAmplitudeContour contour_from_csv(const std::string& text);

/// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wgqed
