#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace logsieve::zip {

struct Entry {
  std::string name;
  std::string data;
};

/// Extracts every file entry of a zip archive held in memory. Supports the
/// stored and deflate methods; directories are skipped. Throws InputError on
/// malformed archives, zip64 archives and CRC mismatches.
std::vector<Entry> read_archive(std::string_view bytes);

/// Writes a zip archive with stored (uncompressed) entries.
std::string write_stored_archive(const std::vector<Entry>& entries);

}  // namespace logsieve::zip
