#pragma once

#include <string>
#include <vector>

namespace uniembed {

// Full command-line entry point, argv[0] excluded. Returns the process exit
// code: 0 on success, 1 on domain errors, 2 on usage errors.
int run(const std::vector<std::string>& args);

}  // namespace uniembed
