#pragma once

#include <string>
#include <vector>

namespace bkt {

/// Entry point of the command-line frontend. Returns the process exit
/// code: 0 success, 2 usage, 3 I/O, 4 data schema, 5 fit degeneracy.
int run_cli(const std::vector<std::string>& args);

} // namespace bkt
