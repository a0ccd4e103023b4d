#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace prefmatch {

/// Subcommands: train, evaluate, synth, stats, gradcheck. Returns the
/// process exit status; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Splits `--key value`, `--key=value` and bare boolean `--key` tokens.
/// Dashes in keys become underscores.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& tokens);

}  // namespace prefmatch
