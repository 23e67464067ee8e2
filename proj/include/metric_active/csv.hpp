#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace metric_active {

// Version stamped into the first column of every CSV the tools emit.
inline constexpr int kCsvSchemaVersion = 1;

// Shortest round-trip representation, identical on every run.
std::string format_double(double v);

// Minimal row builder; fields never contain commas so no quoting is done.
class CsvRow {
 public:
  CsvRow& add(std::string_view s);
  CsvRow& add(const char* s) { return add(std::string_view(s)); }
  CsvRow& add(const std::string& s) { return add(std::string_view(s)); }
  CsvRow& add(double v) { return add(format_double(v)); }
  CsvRow& add(long long v) { return add(std::to_string(v)); }
  CsvRow& add(int v) { return add(static_cast<long long>(v)); }
  CsvRow& add(long v) { return add(static_cast<long long>(v)); }
  CsvRow& add(unsigned long v) { return add(std::to_string(v)); }
  CsvRow& add(unsigned long long v) { return add(std::to_string(v)); }
  CsvRow& add(unsigned v) { return add(static_cast<unsigned long>(v)); }
  CsvRow& add(bool v) { return add(v ? 1 : 0); }
  CsvRow& empty() { return add(std::string_view{}); }

  const std::string& str() const { return line_; }

 private:
  std::string line_;
  bool first_ = true;
};

std::string csv_header(std::initializer_list<std::string_view> columns);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace metric_active
