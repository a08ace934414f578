// cli.hpp - Library entry point for the experiment-runner CLI.

#pragma once

#include <iosfwd>

namespace moelab {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Exit codes: 0 success, 2 usage/precondition, 3 input data, 4 divergence.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace moelab
