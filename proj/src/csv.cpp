#include "bnkf/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace bnkf::csv {

std::string format_double(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::runtime_error("csv: bad numeric field '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::runtime_error("csv: bad integer field '" + std::string(s) + "'");
  return v;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("csv: missing column '" + std::string(name) + "'");
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Table read_file(const std::string& path,
                const std::vector<std::string>& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);

  if (!expected_header.empty()) {
    for (const auto& col : t.header) {
      bool known = false;
      for (const auto& e : expected_header)
        if (e == col) known = true;
      if (!known)
        throw std::runtime_error("csv: unknown column '" + col + "' in " + path);
    }
    for (const auto& e : expected_header) {
      bool present = false;
      for (const auto& col : t.header)
        if (e == col) present = true;
      if (!present)
        throw std::runtime_error("csv: missing column '" + e + "' in " + path);
    }
  }

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw std::runtime_error("csv: ragged row in " + path);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

struct Writer::Impl {
  std::ofstream out;
  std::size_t width;
};

Writer::Writer(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl{std::ofstream(path, std::ios::binary), header.size()}) {
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("csv: cannot write " + path);
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << header[i];
  }
  impl_->out << '\n';
}

Writer::~Writer() {
  delete impl_;
}

void Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != impl_->width)
    throw std::runtime_error("csv: row width mismatch");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << fields[i];
  }
  impl_->out << '\n';
}

void Writer::close() {
  impl_->out.close();
  if (!impl_->out) throw std::runtime_error("csv: write failure on close");
}

}  // namespace bnkf::csv
