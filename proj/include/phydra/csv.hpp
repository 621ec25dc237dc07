#pragma once

#include <string>
#include <vector>

namespace phydra {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;           // -1 if absent
    int require_column(const std::string& name) const;   // throws if absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

void write_csv(const std::string& path, const CsvTable& table);

// shortest round-trip decimal representation, stable across runs
std::string format_double(double x);

double parse_double(const std::string& s);
long parse_long(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace phydra
