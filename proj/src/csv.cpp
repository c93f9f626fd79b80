#include "mspop/csv.hpp"

#include "mspop/errors.hpp"

#include <cstdio>

namespace mspop {

std::string csv_format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw IoError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out_ << ',';
        out_ << columns[i];
    }
    out_ << '\n';
    check();
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::row(std::span<const double> values) {
    if (values.size() != columns_)
        throw IoError("'" + path_ + "': row width " + std::to_string(values.size()) +
                      " does not match header width " + std::to_string(columns_));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_format(values[i]);
    }
    out_ << '\n';
    check();
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw IoError("'" + path_ + "': row width " + std::to_string(cells.size()) +
                      " does not match header width " + std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    check();
}

void CsvWriter::check() const {
    if (!out_) throw IoError("failed writing '" + path_ + "'");
}

} // namespace mspop
