#include "phydra/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "phydra/common.hpp"

namespace phydra {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_column(const std::string& name) const {
    int idx = column(name);
    if (idx < 0) throw std::runtime_error("missing CSV column: " + name);
    return idx;
}

static std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_offset) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quote in CSV", line_offset + line.size());
    fields.push_back(cur);
    return fields;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        std::size_t line_start = pos;
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        if (line.empty() || line == "\r") {
            if (nl == std::string::npos) break;
            continue;
        }
        auto fields = split_csv_line(line, line_start);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size())
                throw ParseError("CSV row has " + std::to_string(fields.size()) +
                                     " fields, header has " + std::to_string(table.header.size()),
                                 line_start);
            table.rows.push_back(std::move(fields));
        }
        if (nl == std::string::npos) break;
    }
    if (first) throw std::runtime_error("empty CSV input");
    return table;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
    try {
        return parse_csv(read_text_file(path));
    } catch (const ParseError& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

static bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

static void append_field(std::string& out, const std::string& field) {
    if (!needs_quoting(field)) {
        out += field;
        return;
    }
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        append_field(out, table.header[i]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            append_field(out, row[i]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

std::string format_double(double x) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "NA" || s.empty()) throw std::runtime_error("expected a number, got '" + s + "'");
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw std::runtime_error("trailing characters in number '" + s + "'");
    return v;
}

long parse_long(const std::string& s) {
    std::size_t used = 0;
    long v;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("expected an integer, got '" + s + "'");
    }
    if (used != s.size()) throw std::runtime_error("trailing characters in integer '" + s + "'");
    return v;
}

}  // namespace phydra
