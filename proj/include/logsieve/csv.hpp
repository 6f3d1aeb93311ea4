#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace logsieve::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF. Lines whose
/// first character is '#' are treated as comments and skipped.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);
std::string join(const Row& row);

/// Index of `name` in a header row, or -1.
int column(const Row& header, std::string_view name);

}  // namespace logsieve::csv
