// Command-line front end: simulate, sweep, tune, compare, collapse.

#ifndef QFB_CLI_HPP
#define QFB_CLI_HPP

#include <iosfwd>

namespace qfb {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAbort = 3;
inline constexpr int kExitCheck = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qfb

#endif  // QFB_CLI_HPP
