#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace langsens {

/// Shortest decimal text that round-trips the double. Locale-independent.
std::string format_double(double v);

/// CSV with `#`-prefixed comment header lines, then one header row, then
/// data rows.
class CsvWriter {
  public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}
    void comment(const std::string& line);
    void header(std::span<const std::string> cols);
    void row(std::span<const double> vals);
    void row_mixed(std::span<const std::string> vals);

  private:
    std::ostream& os_;
};

}  // namespace langsens
