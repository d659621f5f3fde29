#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fedl::csv {

/// Splits one comma-separated line. Double-quoted fields may contain commas;
/// a doubled quote inside quotes is a literal quote. Unquoted fields are
/// trimmed of surrounding blanks and a trailing '\r'.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next line; returns false at end of stream. Strips a UTF-8 BOM
/// from the very first line when `first` is set.
bool read_line(std::istream& in, std::string& line, bool first = false);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest decimal representation that round-trips the double.
std::string format_double(double v);

}  // namespace fedl::csv
