#pragma once

#include <string>
#include <vector>

namespace driftmon::cli {

// Dispatches one CLI invocation; args excludes the program name.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 statistical
// degeneracy; `monitor` exits 10 when the drift test rejects.
int run(const std::vector<std::string>& args);

}  // namespace driftmon::cli
