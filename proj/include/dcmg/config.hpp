#pragma once

#include "dcmg/microgrid.hpp"

#include <filesystem>
#include <string>

namespace dcmg {

/// Parses a YAML experiment description. Ids in the file are one-based.
/// Buses without explicit gains get synthesized ones (using the optional
/// `gain_synthesis` block). Throws Error(ConfigError) with
/// "origin:line:column: field: problem" diagnostics; graph and parameter
/// validation failures are reported as ConfigError as well.
MicrogridSpec parse_config(const std::string& text, const std::string& origin = "<config>");

MicrogridSpec load_config(const std::filesystem::path& path);

/// Writes a config that parses back to an identical spec, gains included.
std::string emit_config(const MicrogridSpec& spec);

}  // namespace dcmg
