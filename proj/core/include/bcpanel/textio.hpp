#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bcpanel {

// Small text helpers shared by the CSV and config readers. Parsers are
// strict: trailing junk in a numeric field is an error, signalled by
// returning nullopt.

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);
std::string lower(const std::string& s);

std::optional<long> parse_long(const std::string& s);
std::optional<double> parse_double(const std::string& s);
std::optional<std::uint64_t> parse_u64(const std::string& s);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Read a CSV file into header + rows; empty lines are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const; // -1 if absent
};
CsvTable read_csv(const std::string& path);

} // namespace bcpanel
