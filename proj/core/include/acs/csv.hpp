#pragma once

#include <string>
#include <vector>

namespace acs {

// Shortest representation that round-trips a double exactly. Used by every
// CSV writer so committed outputs stay byte-stable.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

} // namespace acs
