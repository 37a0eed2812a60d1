#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iucl::cli {

// Exit codes: 0 success, 1 runtime error, 2 usage error. Errors are also
// written to `err` as {"error": message, "kind": name}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace iucl::cli
