#ifndef FDNC_IO_HPP
#define FDNC_IO_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdnc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest representation that round-trips to the same double.
std::string format_double(double v);

/// Parses a full token as a double; throws IoError otherwise.
double parse_double(const std::string& token);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

/// Comma-separated with one header line.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Column names theta_1..theta_d.
std::vector<std::string> theta_header(std::size_t d);

/// Writes the whole string, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace fdnc

#endif
