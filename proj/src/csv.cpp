#include "metric_active/csv.hpp"

#include <charconv>
#include <fstream>

#include "metric_active/core.hpp"

namespace metric_active {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvRow& CsvRow::add(std::string_view s) {
  if (!first_) line_.push_back(',');
  line_.append(s);
  first_ = false;
  return *this;
}

std::string csv_header(std::initializer_list<std::string_view> columns) {
  CsvRow row;
  for (auto c : columns) row.add(c);
  return row.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace metric_active
