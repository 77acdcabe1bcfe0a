#pragma once

#include <string>
#include <vector>

namespace igae {

// Full command-line surface; returns the process exit code.
// 0 = success, 1 = runtime failure, 2 = usage/config error.
int cli_dispatch(const std::vector<std::string>& argv);
int cli_dispatch(int argc, char** argv);

}  // namespace igae
