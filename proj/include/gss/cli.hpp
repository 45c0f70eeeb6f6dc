#pragma once

// Command-line front end. Every command writes into its --out directory:
// the command's outputs, a manifest.json describing the run, and a .lock
// file held for the duration of the run.
//
// Settings resolve as: command-line flag, then GSS_<NAME> environment
// variable, then the JSON config file (--config or GSS_CONFIG), then the
// built-in default.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gss/error.hpp"

namespace gss::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitTransport = 4,
  kExitNumeric = 5,
};

int exit_code_for(ErrorKind kind) noexcept;

struct RunContext {
  /// Environment lookup; defaults to std::getenv.
  std::function<std::optional<std::string>(std::string_view)> getenv;
  std::ostream* out = nullptr;  // defaults to std::cout
  std::ostream* err = nullptr;  // defaults to std::cerr
};

/// Runs one command. `args` excludes the program name.
int run(std::span<const std::string> args, const RunContext& ctx = {});

}  // namespace gss::cli
