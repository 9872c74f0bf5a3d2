#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ltd::cli {

// Exit status: 0 success, 1 data or usage error, 2 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ltd::cli
