#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cellscope {

struct CellAddress {
    std::string sheet;
    int row = 1;  // 1-based
    int col = 1;  // 1-based

    auto operator<=>(const CellAddress&) const = default;
    bool operator==(const CellAddress&) const = default;
};

// "C7" style label for a (row, col) pair, without sheet.
std::string a1_label(int row, int col);
// "Sheet1!C7"
std::string to_string(const CellAddress& a);
// Column letters for a 1-based column index ("A", "AB", ...).
std::string column_letters(int col);
// Inverse of column_letters; returns 0 on malformed input.
int column_index(std::string_view letters);

struct Blank {
    bool operator==(const Blank&) const = default;
};

struct ErrorLiteral {
    std::string code;  // "#DIV/0!", "#REF!", ...
    bool operator==(const ErrorLiteral&) const = default;
};

bool is_error_literal(std::string_view text);

using Value = std::variant<Blank, double, std::string, bool, ErrorLiteral>;

std::string value_type_name(const Value& v);
std::string value_text(const Value& v);

struct Cell {
    CellAddress address;
    Value value;
    std::optional<std::string> formula;  // leading "=" stripped

    bool non_blank() const {
        return !std::holds_alternative<Blank>(value) || formula.has_value();
    }
    bool operator==(const Cell&) const = default;
};

struct Sheet {
    std::string name;
    // keyed by (row, col) so iteration is row-major
    std::map<std::pair<int, int>, Cell> cells;

    const Cell* find(int row, int col) const;
    bool operator==(const Sheet&) const = default;
};

struct NamedRange {
    std::string name;
    std::string refers_to;             // as written, e.g. "Sheet1!$B$3:$B$5"
    std::vector<CellAddress> cells;    // expanded rectangle, row-major
    bool operator==(const NamedRange&) const = default;
};

class WorkbookError : public std::runtime_error {
public:
    WorkbookError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct IngestIssue {
    std::string location;  // "Sheet1!C7", "namedRange:Rate", ...
    std::string category;  // "bad-cell", "external-reference", "duplicate-name", ...
    std::string message;
    bool operator==(const IngestIssue&) const = default;
};

struct IngestReport {
    std::string source;
    std::vector<IngestIssue> issues;
    int external_references = 0;
};

class Workbook {
public:
    Workbook() = default;

    Sheet& add_sheet(std::string name);
    // Inserts or replaces a cell. Creates the sheet when missing.
    void set_cell(Cell cell);
    // Adds a named range after resolving `refers_to`; throws std::invalid_argument
    // on duplicate (case-insensitive) names or unparseable regions.
    void add_named_range(std::string name, std::string refers_to);

    const std::vector<Sheet>& sheets() const { return sheets_; }
    const std::vector<NamedRange>& named_ranges() const { return names_; }

    const Sheet* sheet(std::string_view name) const;
    int sheet_index(std::string_view name) const;  // -1 when absent
    const Cell* cell(const CellAddress& a) const;
    const NamedRange* named_range(std::string_view name) const;

    // Returns a copy with sheets permuted; used by invariance tests.
    Workbook with_sheet_order(const std::vector<std::size_t>& order) const;

    bool operator==(const Workbook&) const = default;

private:
    std::vector<Sheet> sheets_;
    std::vector<NamedRange> names_;
};

std::size_t non_blank_count(const Workbook& wb);

enum class WorkbookFormat { Auto, Xlsx, InterchangeJson };

struct LoadResult {
    Workbook workbook;
    IngestReport report;
};

LoadResult load_workbook(const std::filesystem::path& path, WorkbookFormat format = WorkbookFormat::Auto);

// Interchange JSON (the fixture format).
LoadResult read_interchange_json(std::string_view text, const std::string& source = "<memory>");
std::string write_interchange_json(const Workbook& wb);
void save_interchange_json(const Workbook& wb, const std::filesystem::path& path);

LoadResult read_xlsx(const std::filesystem::path& path);

std::string ingest_report_json(const IngestReport& report);

// Counts formulas that point into other workbooks and records them as issues.
void scan_external_references(const Workbook& wb, IngestReport& report);

}  // namespace cellscope
