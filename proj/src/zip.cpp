#include "logsieve/zip.hpp"

#include <cstdint>

#include <zlib.h>

#include "logsieve/error.hpp"

namespace logsieve::zip {
namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;

std::uint16_t u16(std::string_view b, std::size_t at) {
  if (at + 2 > b.size()) throw InputError("zip: truncated archive");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(u16(b, at)) |
         (static_cast<std::uint32_t>(u16(b, at + 2)) << 16);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xFFFF));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

std::string inflate_raw(std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw InputError("zip: inflateInit failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw InputError("zip: corrupt deflate stream");
  }
  return out;
}

std::uint32_t crc_of(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::vector<Entry> read_archive(std::string_view bytes) {
  // The end-of-central-directory record sits within the last 64 KiB + 22 bytes.
  if (bytes.size() < 22) throw InputError("zip: archive too small");
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = bytes.size() > 65557 ? bytes.size() - 65557 : 0;
  for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
    if (u32(bytes, at) == kEndOfCentralSig) {
      eocd = at;
      break;
    }
  }
  if (eocd == std::string_view::npos) throw InputError("zip: no end-of-central-directory record");

  const std::uint16_t count = u16(bytes, eocd + 10);
  const std::uint32_t dir_offset = u32(bytes, eocd + 16);
  if (count == 0xFFFF || dir_offset == 0xFFFFFFFF) throw InputError("zip: zip64 archives are not supported");

  std::vector<Entry> entries;
  std::size_t at = dir_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (u32(bytes, at) != kCentralHeaderSig) throw InputError("zip: bad central directory");
    const std::uint16_t method = u16(bytes, at + 10);
    const std::uint32_t crc = u32(bytes, at + 16);
    const std::uint32_t csize = u32(bytes, at + 20);
    const std::uint32_t usize = u32(bytes, at + 24);
    const std::uint16_t name_len = u16(bytes, at + 28);
    const std::uint16_t extra_len = u16(bytes, at + 30);
    const std::uint16_t comment_len = u16(bytes, at + 32);
    const std::uint32_t local = u32(bytes, at + 42);
    if (at + 46 + name_len > bytes.size()) throw InputError("zip: truncated central directory");
    std::string name(bytes.substr(at + 46, name_len));
    at += 46 + name_len + extra_len + comment_len;

    if (!name.empty() && name.back() == '/') continue;
    if (u32(bytes, local) != kLocalHeaderSig) throw InputError("zip: bad local header for " + name);
    const std::size_t data_at = local + 30 + u16(bytes, local + 26) + u16(bytes, local + 28);
    if (data_at + csize > bytes.size()) throw InputError("zip: truncated entry " + name);
    const std::string_view payload = bytes.substr(data_at, csize);

    Entry e;
    e.name = std::move(name);
    if (method == 0) {
      e.data = std::string(payload);
    } else if (method == 8) {
      e.data = inflate_raw(payload, usize);
    } else {
      throw InputError("zip: unsupported compression method " + std::to_string(method));
    }
    if (crc_of(e.data) != crc) throw InputError("zip: CRC mismatch for " + e.name);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string write_stored_archive(const std::vector<Entry>& entries) {
  std::string out;
  std::string central;
  for (const auto& e : entries) {
    const auto offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc_of(e.data);
    const auto size = static_cast<std::uint32_t>(e.data.size());
    const auto name_len = static_cast<std::uint16_t>(e.name.size());

    put32(out, kLocalHeaderSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // stored
    put16(out, 0);   // mod time
    put16(out, 0x21);  // mod date 1980-01-01
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out += e.name;
    out += e.data;

    put32(central, kCentralHeaderSig);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0x21);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += e.name;
  }
  const auto dir_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndOfCentralSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, dir_offset);
  put16(out, 0);
  return out;
}

}  // namespace logsieve::zip
