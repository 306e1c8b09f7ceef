#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stcaog::cli {

// Runs one command line. Returns 0 on success, 1 on a domain error, 2 on a
// usage error. Diagnostics go to `err`; data only to the named files.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace stcaog::cli
