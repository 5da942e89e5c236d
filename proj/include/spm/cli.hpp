#pragma once

#include <iosfwd>

namespace spm {

// Exit codes: 0 success, 1 usage or format error, 2 runtime or numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// SPM_SEED when set and valid, otherwise 42.
unsigned long long default_seed();

}  // namespace spm
