#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace heatrec {

// Runs one CLI invocation, e.g. {"train", "--config", "desk.json"}.
// Returns the process exit status: 0 on success, 2 on configuration or
// usage errors, 1 on runtime failures.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace heatrec
