#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace piezo::csv {

// Shortest representation that parses back to the identical double.
std::string format(double v);
double parse_double(std::string_view s);

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  Writer& cell(double v);
  Writer& cell(std::string_view s);
  Writer& cell(long long v);
  void end_row();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  bool first_in_row_ = true;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws IoError when missing
  std::vector<double> numeric_column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);

}  // namespace piezo::csv
