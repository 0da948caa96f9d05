#include "fren/csv.hpp"

#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fren {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
    if (s == "nan" || s == "NaN" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw InputError("csv line " + std::to_string(line_no) + ": cannot parse '" + s + "'");
    }
    return v;
}

}  // namespace

std::size_t NumericTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return k;
    throw InputError("csv: no column named '" + name + "'");
}

NumericTable read_csv(std::istream& is) {
    NumericTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        t.header = split_line(line);
        break;
    }
    if (t.header.empty()) throw InputError("csv: missing header row");
    std::vector<double> data;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != t.header.size()) {
            throw InputError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                             " fields, got " + std::to_string(cells.size()));
        }
        for (const auto& c : cells) data.push_back(parse_number(c, line_no));
        ++rows;
    }
    t.values = Matrix(rows, t.header.size(), std::move(data));
    return t;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_csv(std::ostream& os, const std::vector<std::string>& header, const Matrix& values) {
    if (header.size() != values.cols()) throw DimensionError("write_csv: header width differs from data");
    for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
    os << '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        for (std::size_t k = 0; k < values.cols(); ++k) os << (k ? "," : "") << format_double(values(i, k));
        os << '\n';
    }
}

}  // namespace fren
