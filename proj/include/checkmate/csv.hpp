#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace checkmate::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

/// RFC 4180 reader: quoted fields may contain commas, quotes ("") and line
/// breaks; CRLF and LF are both accepted. A UTF-8 BOM is skipped.
/// Throws Error{Parse} on an unterminated quote or stray quote.
std::vector<Row> parse(std::string_view text);

/// Quotes only when needed; terminates the record with CRLF.
void append_row(std::string& out, const std::vector<std::string>& fields);

}  // namespace checkmate::csv
