#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bnkf::csv {

// Minimal CSV layer shared by all file formats. Numbers are written with
// std::to_chars shortest round-trip form, so emitted files are byte-stable
// for identical inputs and parse back to bit-identical doubles.

std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

// Reads a whole CSV file. `expected_header` is enforced exactly: a missing
// or unknown column fails with the offending name in the message.
Table read_file(const std::string& path,
                const std::vector<std::string>& expected_header);

class Writer {
 public:
  explicit Writer(const std::string& path,
                  const std::vector<std::string>& header);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace bnkf::csv
