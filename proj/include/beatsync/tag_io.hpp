#pragma once

#include <string>

#include "beatsync/time_base.hpp"

namespace beatsync {

// Binary time-tag format: optional 16-byte header (magic "TTAG", u32 version,
// u64 count, little-endian) followed by one int64 femtosecond value per tag.
// CSV mode writes one decimal integer per line for debugging.

void write_tags_binary(const std::string& path, const TimeTagSeries& tags,
                       bool with_header = true);
TimeTagSeries read_tags_binary(const std::string& path);

void write_tags_csv(const std::string& path, const TimeTagSeries& tags);
TimeTagSeries read_tags_csv(const std::string& path);

}  // namespace beatsync
