#include "langsens/csv.hpp"

#include <charconv>
#include <cmath>

namespace langsens {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void CsvWriter::comment(const std::string& line) { os_ << "# " << line << "\n"; }

void CsvWriter::header(std::span<const std::string> cols) {
    for (size_t i = 0; i < cols.size(); ++i) os_ << (i ? "," : "") << cols[i];
    os_ << "\n";
}

void CsvWriter::row(std::span<const double> vals) {
    for (size_t i = 0; i < vals.size(); ++i) os_ << (i ? "," : "") << format_double(vals[i]);
    os_ << "\n";
}

void CsvWriter::row_mixed(std::span<const std::string> vals) {
    for (size_t i = 0; i < vals.size(); ++i) os_ << (i ? "," : "") << vals[i];
    os_ << "\n";
}

}  // namespace langsens
