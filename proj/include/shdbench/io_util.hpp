#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace shdbench {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // "# key=value" lines found before the header
    std::map<std::string, std::string> comments;

    int column(const std::string& name) const;   // -1 when absent
    int require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::vector<std::string> split_csv_line(const std::string& line);
std::string join_csv_line(const std::vector<std::string>& fields);

/// Flat "key = value" text files (stats files and similar).
std::map<std::string, std::string> read_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv);

std::string slurp_file(const std::string& path);
void spit_file(const std::string& path, const std::string& content);

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xCBF29CE484222325ULL);
uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xCBF29CE484222325ULL);
std::string hex64(uint64_t v);

std::string format_double(double v);      // shortest round-trip ("%.17g" trimmed)
double parse_double(const std::string& s);
int64_t parse_int(const std::string& s);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
bool starts_with(const std::string& s, const std::string& prefix);

}  // namespace shdbench
