#include "piezo/csv.hpp"

#include "piezo/errors.hpp"

#include <charconv>
#include <sstream>

namespace piezo::csv {

std::string format(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("cannot parse number '" + std::string(s) + "'");
  return v;
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const std::string& h : header) cell(h);
  end_row();
}

Writer& Writer::cell(double v) { return cell(std::string_view(format(v))); }

Writer& Writer::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

Writer& Writer::cell(std::string_view s) {
  if (!first_in_row_) out_ << ',';
  out_ << s;
  first_in_row_ = false;
  return *this;
}

void Writer::end_row() {
  out_ << '\n';
  first_in_row_ = true;
  if (!out_) throw IoError("write failed for '" + path_.string() + "'");
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError("missing column '" + std::string(name) + "'");
}

std::vector<double> Table::numeric_column(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(parse_double(r.at(c)));
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw IoError("ragged row in '" + path.string() + "'");
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError("empty csv '" + path.string() + "'");
  return t;
}

}  // namespace piezo::csv
