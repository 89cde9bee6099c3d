#pragma once

namespace survexplain {

// Exit codes: 0 success, 1 computation error (JSON diagnostics on stderr),
// 2 usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace survexplain
