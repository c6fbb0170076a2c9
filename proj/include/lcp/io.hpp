#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lcp/estimates.hpp"
#include "lcp/mesh.hpp"

namespace lcp::io {

/// Shortest representation carrying 17 significant digits, so equal doubles
/// always print to equal bytes and reruns diff clean.
std::string format_double(double v);

/// Rectangular text table; to_string emits comma-separated fields with LF
/// line endings and a mandatory header row. Fields containing a comma,
/// quote, or newline are quoted RFC-4180 style.
struct csv_table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Dense array file: u64 rank, u64 extent per dimension, then the values as
/// 64-bit floats, everything little-endian.
struct dense_array {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

void save_array(const std::filesystem::path& path, const dense_array& a);
dense_array load_array(const std::filesystem::path& path);

void save_trajectory(const std::filesystem::path& path,
                     const mesh::space_time_field& u);
mesh::space_time_field load_trajectory(const std::filesystem::path& path);

/// FNV-1a, the 64-bit variant.
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

/// One row per evaluated inequality: identity columns, one column per
/// labeled term (union over the rows, in first-appearance order, prefixed
/// with the side it belongs to), then the totals and the verdict.
csv_table report_table(const std::vector<estimates::estimate_report>& reports);

}  // namespace lcp::io
