#pragma once

#include <cstddef>
#include <string_view>

namespace rpl::logging {

// Warnings go to stderr unless silenced; the counter lets callers (and
// tests) observe that a warning fired without scraping stderr.
void warn(std::string_view message);
void info(std::string_view message);

std::size_t warning_count();
void set_quiet(bool quiet);
bool quiet();

}  // namespace rpl::logging
