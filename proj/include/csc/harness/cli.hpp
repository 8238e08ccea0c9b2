#pragma once

#include <iosfwd>

namespace csc::harness {

/// Entry point of csc_cli. Returns the process exit code: 0 on success,
/// 1 when `verify` finds a failing check or a run aborts, 2 on a bad flag or
/// malformed config (message on `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csc::harness
