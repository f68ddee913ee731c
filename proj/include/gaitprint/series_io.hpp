#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaitprint/ingest.hpp"

namespace gaitprint {

// Canonical interval store. One record per (subject, session, j) holding S
// vector magnitudes.
//
// Binary layout, all integers and floats little-endian:
//   "GPRT"            4 bytes magic
//   version           u8 (= 1)
//   tag_len           u16, then tag_len bytes of free-form provenance
//   S                 u32
//   n_records         u64
//   per record:
//     id_len          u16, then id_len bytes of UTF-8 subject id
//     session         i32
//     j               i32
//     v[0..S)         f64 x S
//
// CSV layout: optional "# comment" lines, header "subject,session,j,v1,...,vS",
// one row per record, shortest round-trip decimal formatting.

inline constexpr std::uint8_t kSeriesFormatVersion = 1;

void write_series_binary(std::ostream& out, std::span<const SubjectSeries> series, std::string_view tag = {});
std::vector<SubjectSeries> read_series_binary(std::istream& in, std::string* tag = nullptr);

void write_series_csv(std::ostream& out, std::span<const SubjectSeries> series, std::string_view comment = {});
std::vector<SubjectSeries> read_series_csv(std::istream& in);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

} // namespace gaitprint
