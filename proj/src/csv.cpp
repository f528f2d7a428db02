#include "qrc/csv.hpp"

#include "qrc/errors.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace qrc {

std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header)
    : os_(os), columns_(header.size()) {
    for (const auto& h : header) cell(h);
    end_row();
}

void CsvWriter::sep() {
    if (in_row_ == columns_) throw ShapeError("CsvWriter: too many cells in row");
    if (in_row_ > 0) os_ << ',';
    ++in_row_;
}

CsvWriter& CsvWriter::cell(double v) {
    sep();
    os_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
    sep();
    os_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
    sep();
    os_ << v;
    return *this;
}

void CsvWriter::end_row() {
    if (in_row_ != columns_) {
        throw ShapeError("CsvWriter: row has " + std::to_string(in_row_) + " cells, expected " +
                         std::to_string(columns_));
    }
    os_ << '\n';
    in_row_ = 0;
}

std::vector<std::vector<std::string>> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace qrc
