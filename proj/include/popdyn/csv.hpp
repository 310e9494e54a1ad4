#ifndef POPDYN_CSV_HPP
#define POPDYN_CSV_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popdyn {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Locale-independent numeric formatting/parsing (std::to_chars round-trip).
std::string format_double(double value);
std::string format_int(std::int64_t value);
double parse_double(std::string_view text);           // throws on garbage
std::int64_t parse_int(std::string_view text);        // throws on garbage

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;       // unquoted cell text
    // Comment lines (leading '#') found before the header, provenance included.
    std::vector<std::string> comments;

    std::optional<std::size_t> column(std::string_view name) const;
};

// RFC-4180-style: quoted fields, doubled quotes. Records are single lines.
CsvTable read_csv(const std::string& path);
std::string csv_escape(std::string_view field);
std::vector<std::string> split_csv_line(std::string_view line);

// Collects lines, then writes them atomically (temp file + rename) with a
// one-line provenance header in front of the payload.
class OutputFile {
public:
    OutputFile(std::string path, std::string_view fingerprint_hex, std::uint64_t seed,
               std::string_view extra = "");

    void line(std::string_view text) { payload_.push_back(std::string(text)); }
    void row(const std::vector<std::string>& cells);

    // Writes and renames; throws on IO failure.
    void commit();

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::string provenance_;
    std::vector<std::string> payload_;
};

std::string read_text_file(const std::string& path);

}  // namespace popdyn

#endif  // POPDYN_CSV_HPP
