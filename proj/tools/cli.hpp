#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cipher_icl::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cipher_icl::cli
