#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctree::cli {

// Entry point of the ctree command. `args` excludes the program name.
// Returns 0 on success, 1 on domain or configuration errors, 2 on usage
// errors.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace ctree::cli
