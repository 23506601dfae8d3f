#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace termmap::csv {

using Row = std::vector<std::string>;

/// Header row plus data rows, comma-delimited, RFC 4180 quoting.
struct Table {
  Row header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

/// Throws FormatError on an unterminated quoted field. Blank lines are
/// skipped; a UTF-8 byte-order mark before the header is dropped.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace termmap::csv
