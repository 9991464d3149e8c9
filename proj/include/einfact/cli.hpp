#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "einfact/io.hpp"
#include "einfact/losses.hpp"

namespace einfact {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitUsage = 2,
    kExitDomain = 3,
};

/// Loss described by a manifest's loss name and parameters.
LossSpec loss_from_manifest(const RunManifest& manifest);

/// Entry point behind the `einfact` binary: `fit`, `evaluate` and `synth`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace einfact
