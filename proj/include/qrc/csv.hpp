#pragma once

// Plot-ready CSV: header row, '.' decimal separator, 17 significant digits so
// doubles round-trip exactly.

#include <iosfwd>
#include <string>
#include <vector>

namespace qrc {

std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(long v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(const std::string& v);
    void end_row();

private:
    void sep();

    std::ostream& os_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

/// Splits a CSV file into rows of fields (no quoting support; our writers
/// never emit commas inside fields).
std::vector<std::vector<std::string>> read_csv(std::istream& is);

}  // namespace qrc
