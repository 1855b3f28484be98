// Batch driver entry point, callable in-process so tests can exercise the
// full argument-to-report path without spawning binaries.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prcm {

// argv-style arguments without the program name. Returns the process exit
// code: 0 = success, 1 = verification failure (report carries a witness),
// 2 = usage or configuration error.
int cli_run(std::vector<std::string> args, std::ostream& out,
            std::ostream& err);

}  // namespace prcm
