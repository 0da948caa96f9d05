#include "fren/binary_io.hpp"
#include "fren/csv.hpp"
#include "fren/frengression.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace fren {

namespace {

ColumnKind parse_kind(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "binary") return ColumnKind::Binary;
    throw InputError("schema: unknown column kind '" + s + "'");
}

const char* kind_name(ColumnKind k) { return k == ColumnKind::Binary ? "binary" : "continuous"; }

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    binio::put_u64(os, v.size());
    for (double d : v) binio::put_f64(os, d);
}

std::vector<double> get_doubles(std::istream& is) {
    const auto n = binio::get_u64(is);
    if (n > (1ULL << 32)) throw binio::FormatError("array length implausible");
    std::vector<double> v(n);
    for (double& d : v) d = binio::get_f64(is);
    return v;
}

void put_names(std::ostream& os, const std::vector<std::string>& names, const std::vector<ColumnKind>& kinds) {
    binio::put_u64(os, names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        binio::put_string(os, names[k]);
        binio::put_u32(os, kinds[k] == ColumnKind::Binary ? 1U : 0U);
    }
}

void get_names(std::istream& is, std::vector<std::string>& names, std::vector<ColumnKind>& kinds) {
    const auto n = binio::get_u64(is);
    if (n > (1ULL << 20)) throw binio::FormatError("column count implausible");
    for (std::uint64_t k = 0; k < n; ++k) {
        names.push_back(binio::get_string(is));
        const auto tag = binio::get_u32(is);
        if (tag > 1) throw binio::FormatError("bad column kind tag");
        kinds.push_back(tag == 1 ? ColumnKind::Binary : ColumnKind::Continuous);
    }
}

}  // namespace

ColumnSchema read_schema(std::istream& is) {
    ColumnSchema s;
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        const auto f = split_fields(line);
        if (!header) {
            if (f.size() != 3 || f[0] != "column" || f[1] != "role" || f[2] != "kind") {
                throw InputError("schema: header must be 'column,role,kind'");
            }
            header = true;
            continue;
        }
        if (f.size() != 3) throw InputError("schema line " + std::to_string(line_no) + ": expected three fields");
        const ColumnKind kind = parse_kind(f[2]);
        if (f[1] == "z") {
            s.z_names.push_back(f[0]);
            s.z_kinds.push_back(kind);
        } else if (f[1] == "x" || f[1] == "x0") {
            if (f[1] == "x0") s.x0.push_back(s.x_names.size());
            s.x_names.push_back(f[0]);
            s.x_kinds.push_back(kind);
        } else if (f[1] == "y") {
            s.y_names.push_back(f[0]);
            s.y_kinds.push_back(kind);
        } else {
            throw InputError("schema line " + std::to_string(line_no) + ": unknown role '" + f[1] + "'");
        }
    }
    if (!header) throw InputError("schema: empty file");
    try {
        s.validate();
    } catch (const SpecError& e) {
        throw InputError(e.what());
    }
    return s;
}

void write_schema(std::ostream& os, const ColumnSchema& schema) {
    os << "column,role,kind\n";
    for (std::size_t k = 0; k < schema.d_z(); ++k) os << schema.z_names[k] << ",z," << kind_name(schema.z_kinds[k]) << '\n';
    for (std::size_t k = 0; k < schema.d_x(); ++k) {
        const bool is_x0 = std::find(schema.x0.begin(), schema.x0.end(), k) != schema.x0.end();
        os << schema.x_names[k] << (is_x0 ? ",x0," : ",x,") << kind_name(schema.x_kinds[k]) << '\n';
    }
    for (std::size_t k = 0; k < schema.d_y(); ++k) os << schema.y_names[k] << ",y," << kind_name(schema.y_kinds[k]) << '\n';
}

Matrix read_dataset(std::istream& is, const ColumnSchema& schema) {
    const NumericTable t = read_csv(is);
    std::vector<std::size_t> cols;
    for (const auto* names : {&schema.z_names, &schema.x_names, &schema.y_names})
        for (const auto& name : *names) cols.push_back(t.column(name));
    Matrix out(t.values.rows(), cols.size());
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t k = 0; k < cols.size(); ++k) out(i, k) = t.values(i, cols[k]);
    return out;
}

void write_dataset(std::ostream& os, const ColumnSchema& schema, const Matrix& data) {
    std::vector<std::string> header(schema.z_names);
    header.insert(header.end(), schema.x_names.begin(), schema.x_names.end());
    header.insert(header.end(), schema.y_names.begin(), schema.y_names.end());
    write_csv(os, header, data);
}

void write_schema_block(std::ostream& os, const ColumnSchema& schema) {
    put_names(os, schema.z_names, schema.z_kinds);
    put_names(os, schema.x_names, schema.x_kinds);
    put_names(os, schema.y_names, schema.y_kinds);
    binio::put_u64(os, schema.x0.size());
    for (std::size_t k : schema.x0) binio::put_u64(os, k);
}

ColumnSchema read_schema_block(std::istream& is) {
    ColumnSchema s;
    get_names(is, s.z_names, s.z_kinds);
    get_names(is, s.x_names, s.x_kinds);
    get_names(is, s.y_names, s.y_kinds);
    const auto n0 = binio::get_u64(is);
    if (n0 > s.x_names.size()) throw binio::FormatError("X0 list longer than X");
    for (std::uint64_t k = 0; k < n0; ++k) s.x0.push_back(binio::get_u64(is));
    try {
        s.validate();
    } catch (const SpecError& e) {
        throw binio::FormatError(e.what());
    }
    return s;
}

void write_standardizer(std::ostream& os, const Standardizer& s) {
    put_doubles(os, s.loc);
    put_doubles(os, s.scale);
}

Standardizer read_standardizer(std::istream& is) {
    Standardizer s;
    s.loc = get_doubles(is);
    s.scale = get_doubles(is);
    if (s.loc.size() != s.scale.size()) throw binio::FormatError("scaling arrays differ in length");
    return s;
}

void write_model(std::ostream& os, const FrengressionModel& model) {
    model.validate();
    binio::put_magic(os, "FRM1");
    write_schema_block(os, model.schema);
    write_standardizer(os, model.scaling);
    model.g.write(os);
    write_margin(os, model.f);
    model.h.write(os);
    binio::put_u32(os, model.e ? 1U : 0U);
    if (model.e) model.e->write(os);
    put_doubles(os, model.log.g);
    put_doubles(os, model.log.e);
    put_doubles(os, model.log.fh);
    if (!os) throw std::runtime_error("write_model: stream failure");
}

FrengressionModel read_model(std::istream& is) {
    binio::expect_magic(is, "FRM1");
    ColumnSchema schema = read_schema_block(is);
    Standardizer scaling = read_standardizer(is);
    GeneratorNet g = GeneratorNet::read(is);
    Margin f = read_margin(is);
    GeneratorNet h = GeneratorNet::read(is);
    std::optional<GeneratorNet> e;
    const auto has_e = binio::get_u32(is);
    if (has_e > 1) throw binio::FormatError("bad auxiliary flag");
    if (has_e) e = GeneratorNet::read(is);
    TrainingLog log;
    log.g = get_doubles(is);
    log.e = get_doubles(is);
    log.fh = get_doubles(is);
    FrengressionModel model{std::move(schema), std::move(g), std::move(f), std::move(h), std::move(e),
                            std::move(scaling), std::move(log)};
    try {
        model.validate();
    } catch (const std::exception& ex) {
        throw binio::FormatError(std::string("model file inconsistent: ") + ex.what());
    }
    return model;
}

}  // namespace fren
