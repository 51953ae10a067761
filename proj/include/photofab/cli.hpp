// Command-line front end. The executable forwards to run() so tests can drive
// every subcommand in-process.

#pragma once

#include <iosfwd>

namespace photofab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;

// Subcommands: fill, churn, experiment <e1..e4>, solve <problem.json>,
// cost <shape> <mode> <bytes>. Global flags: --config, --seed, --out,
// --format csv|json, --threads.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace photofab::cli
