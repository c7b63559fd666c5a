#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pdfm {

/// Shortest decimal string that round-trips the double bit-exactly.
std::string format_double(double v);

double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Strict reader for the toolkit's own files: comma-separated, no quoting,
/// every row must match the header width.
CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Reads the whole file; IoError if missing.
std::string read_text_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pdfm
