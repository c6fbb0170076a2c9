#include "lcp/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lcp::io {

namespace {

void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error(path.string() + ": " + why);
}

void push_u64_le(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(char((v >> (8 * b)) & 0xff));
}

std::uint64_t read_u64_le(const std::string& in, std::size_t off) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= std::uint64_t(static_cast<unsigned char>(in[off + b])) << (8 * b);
  return v;
}

std::string quote_field(const std::string& f) {
  if (f.find_first_of(",\"\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_table::to_string() const {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += quote_field(row[i]);
    }
    out += '\n';
  };
  emit(header);
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::logic_error("csv row width does not match the header");
    emit(row);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(path, "write failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for reading");
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return text;
}

void save_array(const std::filesystem::path& path, const dense_array& a) {
  std::size_t expect = a.dims.empty() ? 0 : 1;
  for (std::uint64_t d : a.dims) expect *= d;
  if (expect != a.data.size())
    throw std::invalid_argument("array extents do not match the value count");
  std::string out;
  out.reserve(8 * (1 + a.dims.size()) + 8 * a.data.size());
  push_u64_le(out, a.dims.size());
  for (std::uint64_t d : a.dims) push_u64_le(out, d);
  for (double v : a.data) push_u64_le(out, std::bit_cast<std::uint64_t>(v));
  write_text(path, out);
}

dense_array load_array(const std::filesystem::path& path) {
  const std::string in = read_text(path);
  if (in.size() < 8) fail(path, "truncated array header");
  const std::uint64_t rank = read_u64_le(in, 0);
  if (rank > 8) fail(path, "implausible array rank");
  if (in.size() < 8 * (1 + rank)) fail(path, "truncated extent list");
  dense_array a;
  std::uint64_t count = rank ? 1 : 0;
  for (std::uint64_t d = 0; d < rank; ++d) {
    a.dims.push_back(read_u64_le(in, 8 * (1 + d)));
    count *= a.dims.back();
  }
  const std::size_t payload = in.size() - 8 * (1 + rank);
  if (payload != 8 * count) fail(path, "value payload does not match extents");
  a.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    a.data[i] =
        std::bit_cast<double>(read_u64_le(in, 8 * (1 + rank) + 8 * i));
  return a;
}

void save_trajectory(const std::filesystem::path& path,
                     const mesh::space_time_field& u) {
  dense_array a;
  a.dims = {std::uint64_t(u.nt) + 1, std::uint64_t(u.nx)};
  a.data = u.data;
  save_array(path, a);
}

mesh::space_time_field load_trajectory(const std::filesystem::path& path) {
  const dense_array a = load_array(path);
  if (a.dims.size() != 2 || a.dims[0] == 0)
    fail(path, "expected a rank-2 array with at least one time level");
  mesh::space_time_field u(int(a.dims[0]) - 1, std::size_t(a.dims[1]));
  u.data = a.data;
  return u;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

csv_table report_table(const std::vector<estimates::estimate_report>& reports) {
  std::vector<std::string> term_cols;
  auto col_of = [&](const std::string& side, const std::string& label) {
    return side + ":" + label;
  };
  for (const auto& r : reports) {
    for (const auto& t : r.lhs_terms) {
      const auto c = col_of("lhs", t.label);
      if (std::find(term_cols.begin(), term_cols.end(), c) == term_cols.end())
        term_cols.push_back(c);
    }
    for (const auto& t : r.rhs_terms) {
      const auto c = col_of("rhs", t.label);
      if (std::find(term_cols.begin(), term_cols.end(), c) == term_cols.end())
        term_cols.push_back(c);
    }
  }

  csv_table tbl;
  tbl.header = {"name", "scenario", "s", "lambda", "n", "nt"};
  tbl.header.insert(tbl.header.end(), term_cols.begin(), term_cols.end());
  for (const char* c : {"lhs", "rhs", "margin", "tolerance", "pass", "note"})
    tbl.header.push_back(c);

  for (const auto& r : reports) {
    std::vector<std::string> row = {r.name,
                                    r.scenario,
                                    format_double(r.s),
                                    format_double(r.lambda),
                                    std::to_string(r.n),
                                    std::to_string(r.nt)};
    for (const auto& c : term_cols) {
      std::string cell;
      for (const auto& t : r.lhs_terms)
        if (col_of("lhs", t.label) == c) cell = format_double(t.value);
      for (const auto& t : r.rhs_terms)
        if (col_of("rhs", t.label) == c) cell = format_double(t.value);
      row.push_back(cell);
    }
    row.push_back(format_double(r.lhs));
    row.push_back(format_double(r.rhs));
    row.push_back(format_double(r.margin));
    row.push_back(format_double(r.tolerance));
    row.push_back(r.pass ? "true" : "false");
    row.push_back(r.note);
    tbl.rows.push_back(std::move(row));
  }
  return tbl;
}

}  // namespace lcp::io
