// Command-line surface. Exit codes: 0 success, 2 usage errors (unknown
// subcommand/flag), 1 runtime failures with a machine-readable error line
// on stderr. VESSELFORGE_SEED overrides config seeds; --seed wins over it.

#ifndef VFORGE_CLI_HPP
#define VFORGE_CLI_HPP

namespace vforge::cli {

int dispatch(int argc, const char* const* argv);

}  // namespace vforge::cli

#endif
