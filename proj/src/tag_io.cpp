#include "beatsync/tag_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace beatsync {

namespace {
constexpr char kMagic[4] = {'T', 'T', 'A', 'G'};
constexpr std::uint32_t kVersion = 1;

// The build targets little-endian hosts; raw int64 writes are the wire format.
static_assert(sizeof(std::int64_t) == 8);

void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}
}  // namespace

void write_tags_binary(const std::string& path, const TimeTagSeries& tags, bool with_header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot open for writing", path);
  if (with_header) {
    out.write(kMagic, 4);
    const std::uint32_t v = kVersion;
    const std::uint64_t n = tags.size();
    out.write(reinterpret_cast<const char*>(&v), 4);
    out.write(reinterpret_cast<const char*>(&n), 8);
  }
  for (const auto& t : tags.tags)
    out.write(reinterpret_cast<const char*>(&t.fs), 8);
  if (!out) fail("write failed", path);
}

TimeTagSeries read_tags_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open", path);
  char head[16];
  in.read(head, 16);
  const std::streamsize got = in.gcount();

  TimeTagSeries series;
  series.origin_note = "file:" + path;
  std::uint64_t expect = 0;
  bool has_header = got == 16 && std::memcmp(head, kMagic, 4) == 0;
  if (has_header) {
    std::memcpy(&expect, head + 8, 8);
    series.tags.reserve(expect);
  } else {
    // headerless stream: whatever we already consumed is tag payload
    in.clear();
    in.seekg(0);
  }
  std::int64_t v;
  while (in.read(reinterpret_cast<char*>(&v), 8)) series.tags.push_back({v});
  if (has_header && series.tags.size() != expect) fail("tag count mismatch", path);
  return series;
}

void write_tags_csv(const std::string& path, const TimeTagSeries& tags) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail("cannot open for writing", path);
  for (const auto& t : tags.tags) out << t.fs << "\n";
  if (!out) fail("write failed", path);
}

TimeTagSeries read_tags_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open", path);
  TimeTagSeries series;
  series.origin_note = "file:" + path;
  std::int64_t v;
  while (in >> v) series.tags.push_back({v});
  return series;
}

}  // namespace beatsync
