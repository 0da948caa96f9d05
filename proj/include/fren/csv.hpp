#pragma once

#include "fren/ndiff.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace fren {

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct NumericTable {
    std::vector<std::string> header;
    Matrix values;

    /// Column index by name; throws InputError if absent.
    std::size_t column(const std::string& name) const;
};

/// Comma-separated numbers with a header row. Blank lines are skipped; "nan"
/// parses to NaN so callers can reject it with a useful message.
NumericTable read_csv(std::istream& is);
void write_csv(std::ostream& os, const std::vector<std::string>& header, const Matrix& values);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace fren
