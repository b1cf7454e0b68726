#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace petdiff {

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

// full tool entry point; returns the process exit code
// (0 success, 1 pipeline failure, 2 usage error)
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without the program name

}  // namespace petdiff
