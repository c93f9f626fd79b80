#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace mspop {

// Shortest representation that still round-trips a double exactly
// (17 significant digits).
std::string csv_format(double v);

// Plain comma-separated writer: one fixed header row, then data rows.
// All errors surface as IoError.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);
    ~CsvWriter();

    void row(std::span<const double> values);
    void row(const std::vector<std::string>& cells);

    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::ofstream out_;
    std::size_t columns_ = 0;
    void check() const;
};

} // namespace mspop
