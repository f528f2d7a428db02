#pragma once

// qrc-lab command line: subcommands map onto library experiments.

namespace qrc::cli {

/// Exit codes: 0 success, 1 validation or numeric failure, 2 usage error.
int run(int argc, char** argv);

}  // namespace qrc::cli
