#include "workbook.hpp"

#include "formula/formula.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cellscope {

using nlohmann::json;

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string format_number(double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string column_letters(int col) {
    std::string s;
    while (col > 0) {
        const int r = (col - 1) % 26;
        s.insert(s.begin(), static_cast<char>('A' + r));
        col = (col - 1) / 26;
    }
    return s;
}

int column_index(std::string_view letters) {
    if (letters.empty() || letters.size() > 3) return 0;
    int c = 0;
    for (char ch : letters) {
        if (!std::isalpha(static_cast<unsigned char>(ch))) return 0;
        c = c * 26 + (std::toupper(static_cast<unsigned char>(ch)) - 'A' + 1);
    }
    return c;
}

std::string a1_label(int row, int col) { return column_letters(col) + std::to_string(row); }

std::string to_string(const CellAddress& a) { return a.sheet + "!" + a1_label(a.row, a.col); }

bool is_error_literal(std::string_view text) {
    static constexpr std::array kCodes = {"#NULL!", "#DIV/0!", "#VALUE!", "#REF!", "#NAME?",
                                          "#NUM!",  "#N/A",    "#GETTING_DATA", "#SPILL!", "#CALC!"};
    return std::any_of(kCodes.begin(), kCodes.end(), [&](const char* c) { return iequals(text, c); });
}

std::string value_type_name(const Value& v) {
    switch (v.index()) {
        case 0: return "blank";
        case 1: return "number";
        case 2: return "text";
        case 3: return "boolean";
        default: return "error";
    }
}

std::string value_text(const Value& v) {
    if (std::holds_alternative<double>(v)) return format_number(std::get<double>(v));
    if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "TRUE" : "FALSE";
    if (std::holds_alternative<ErrorLiteral>(v)) return std::get<ErrorLiteral>(v).code;
    return {};
}

const Cell* Sheet::find(int row, int col) const {
    auto it = cells.find({row, col});
    return it == cells.end() ? nullptr : &it->second;
}

Sheet& Workbook::add_sheet(std::string name) {
    if (name.empty()) throw std::invalid_argument("sheet name must be non-empty");
    for (auto& s : sheets_)
        if (iequals(s.name, name)) return s;
    sheets_.push_back(Sheet{std::move(name), {}});
    return sheets_.back();
}

void Workbook::set_cell(Cell cell) {
    if (cell.address.row < 1 || cell.address.col < 1) throw std::invalid_argument("cell row/col must be >= 1");
    Sheet& s = add_sheet(cell.address.sheet);
    cell.address.sheet = s.name;
    const auto key = std::make_pair(cell.address.row, cell.address.col);
    s.cells[key] = std::move(cell);
}

void Workbook::add_named_range(std::string name, std::string refers_to) {
    if (name.empty()) throw std::invalid_argument("named range name must be non-empty");
    if (named_range(name)) throw std::invalid_argument("duplicate named range '" + name + "'");
    auto region = formula::parse_region(refers_to);
    if (!region) throw std::invalid_argument("named range '" + name + "' does not refer to a cell region");
    std::string sheet = region->sheet;
    if (sheet.empty()) {
        if (sheets_.empty()) throw std::invalid_argument("named range '" + name + "' has no sheet");
        sheet = sheets_.front().name;
    } else if (const Sheet* s = this->sheet(sheet)) {
        sheet = s->name;
    }
    NamedRange nr{std::move(name), std::move(refers_to), {}};
    const int r0 = std::min(region->first.row, region->last.row), r1 = std::max(region->first.row, region->last.row);
    const int c0 = std::min(region->first.col, region->last.col), c1 = std::max(region->first.col, region->last.col);
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) nr.cells.push_back(CellAddress{sheet, r, c});
    names_.push_back(std::move(nr));
}

const Sheet* Workbook::sheet(std::string_view name) const {
    for (const auto& s : sheets_)
        if (iequals(s.name, name)) return &s;
    return nullptr;
}

int Workbook::sheet_index(std::string_view name) const {
    for (std::size_t i = 0; i < sheets_.size(); ++i)
        if (iequals(sheets_[i].name, name)) return static_cast<int>(i);
    return -1;
}

const Cell* Workbook::cell(const CellAddress& a) const {
    const Sheet* s = sheet(a.sheet);
    return s ? s->find(a.row, a.col) : nullptr;
}

const NamedRange* Workbook::named_range(std::string_view name) const {
    for (const auto& n : names_)
        if (iequals(n.name, name)) return &n;
    return nullptr;
}

Workbook Workbook::with_sheet_order(const std::vector<std::size_t>& order) const {
    Workbook out;
    for (std::size_t i : order) out.sheets_.push_back(sheets_.at(i));
    out.names_ = names_;
    return out;
}

std::size_t non_blank_count(const Workbook& wb) {
    std::size_t n = 0;
    for (const auto& s : wb.sheets())
        for (const auto& [key, cell] : s.cells)
            if (cell.non_blank()) ++n;
    return n;
}

// ---------------------------------------------------------------- interchange json

namespace {

Value value_from_json(const json& v, const std::string& type) {
    if (type == "blank") return Blank{};
    if (type == "number") {
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return std::stod(v.get<std::string>());
        throw std::invalid_argument("number cell without numeric value");
    }
    if (type == "text") {
        if (!v.is_string()) throw std::invalid_argument("text cell without string value");
        return v.get<std::string>();
    }
    if (type == "boolean") {
        if (!v.is_boolean()) throw std::invalid_argument("boolean cell without boolean value");
        return v.get<bool>();
    }
    if (type == "error") {
        if (!v.is_string() || !is_error_literal(v.get<std::string>()))
            throw std::invalid_argument("error cell without error literal");
        return ErrorLiteral{v.get<std::string>()};
    }
    throw std::invalid_argument("unknown cell type '" + type + "'");
}

std::string infer_type(const json& v) {
    if (v.is_null()) return "blank";
    if (v.is_number()) return "number";
    if (v.is_boolean()) return "boolean";
    if (v.is_string()) return is_error_literal(v.get<std::string>()) ? "error" : "text";
    return "unknown";
}

json value_to_json(const Value& v) {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    if (std::holds_alternative<ErrorLiteral>(v)) return std::get<ErrorLiteral>(v).code;
    return nullptr;
}

std::string strip_eq(std::string f) {
    if (!f.empty() && f.front() == '=') f.erase(0, 1);
    return f;
}

}  // namespace

LoadResult read_interchange_json(std::string_view text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw WorkbookError(source, std::string("malformed workbook JSON: ") + e.what());
    }
    if (!doc.is_object()) throw WorkbookError(source, "workbook JSON must be an object");
    if (doc.contains("version") && doc["version"] != 1) {
        throw WorkbookError(source, "unsupported interchange format version " + doc["version"].dump());
    }

    LoadResult out;
    out.report.source = source;
    const json sheets = doc.value("sheets", json::array());
    if (!sheets.is_array()) throw WorkbookError(source, "'sheets' must be an array");

    for (const auto& sj : sheets) {
        const std::string name = sj.value("name", std::string{});
        if (name.empty()) throw WorkbookError(source, "sheet without a name");
        out.workbook.add_sheet(name);
        for (const auto& cj : sj.value("cells", json::array())) {
            std::string where = name + "!?";
            try {
                int row = 0, col = 0;
                if (cj.contains("ref")) {
                    auto r = formula::parse_region(cj["ref"].get<std::string>());
                    if (!r || r->kind != formula::RefKind::Cell) throw std::invalid_argument("bad cell ref");
                    row = r->first.row;
                    col = r->first.col;
                } else {
                    row = cj.at("row").get<int>();
                    col = cj.at("col").get<int>();
                }
                where = name + "!" + a1_label(std::max(row, 1), std::max(col, 1));
                if (row < 1 || col < 1) throw std::invalid_argument("row/col must be >= 1");
                const json v = cj.value("value", json());
                const std::string type = cj.value("type", infer_type(v));
                Cell cell{CellAddress{name, row, col}, value_from_json(v, type), std::nullopt};
                if (cj.contains("formula") && !cj["formula"].is_null()) {
                    cell.formula = strip_eq(cj["formula"].get<std::string>());
                }
                out.workbook.set_cell(std::move(cell));
            } catch (const std::exception& e) {
                out.report.issues.push_back(IngestIssue{where, "bad-cell", e.what()});
            }
        }
    }

    for (const auto& nj : doc.value("namedRanges", json::array())) {
        const std::string name = nj.value("name", std::string{});
        const std::string refers = nj.value("refersTo", std::string{});
        try {
            if (refers.find('[') != std::string::npos) {
                ++out.report.external_references;
                out.report.issues.push_back(IngestIssue{"namedRange:" + name, "external-reference", refers});
                continue;
            }
            out.workbook.add_named_range(name, strip_eq(refers));
        } catch (const std::exception& e) {
            out.report.issues.push_back(IngestIssue{"namedRange:" + name, "bad-named-range", e.what()});
        }
    }
    scan_external_references(out.workbook, out.report);
    return out;
}

std::string write_interchange_json(const Workbook& wb) {
    json doc;
    doc["version"] = 1;
    doc["sheets"] = json::array();
    for (const auto& s : wb.sheets()) {
        json sj;
        sj["name"] = s.name;
        sj["cells"] = json::array();
        for (const auto& [key, cell] : s.cells) {
            json cj;
            cj["row"] = cell.address.row;
            cj["col"] = cell.address.col;
            cj["value"] = value_to_json(cell.value);
            cj["type"] = value_type_name(cell.value);
            if (cell.formula) cj["formula"] = "=" + *cell.formula;
            sj["cells"].push_back(std::move(cj));
        }
        doc["sheets"].push_back(std::move(sj));
    }
    doc["namedRanges"] = json::array();
    for (const auto& n : wb.named_ranges()) doc["namedRanges"].push_back({{"name", n.name}, {"refersTo", n.refers_to}});
    return doc.dump(2);
}

void save_interchange_json(const Workbook& wb, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw WorkbookError(path, "cannot open for writing");
    os << write_interchange_json(wb) << '\n';
    if (!os) throw WorkbookError(path, "write failed");
}

LoadResult load_workbook(const std::filesystem::path& path, WorkbookFormat format) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw WorkbookError(path, "not a readable file");
    if (format == WorkbookFormat::Auto) {
        std::string ext = path.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".xlsx" || ext == ".xlsm") {
            format = WorkbookFormat::Xlsx;
        } else if (ext == ".json") {
            format = WorkbookFormat::InterchangeJson;
        } else {
            throw WorkbookError(path, "unsupported workbook format '" + ext + "'");
        }
    }
    if (format == WorkbookFormat::Xlsx) return read_xlsx(path);

    std::ifstream is(path, std::ios::binary);
    if (!is) throw WorkbookError(path, "cannot open file");
    std::ostringstream ss;
    ss << is.rdbuf();
    return read_interchange_json(ss.str(), path.string());
}

void scan_external_references(const Workbook& wb, IngestReport& report) {
    for (const auto& s : wb.sheets()) {
        for (const auto& [key, cell] : s.cells) {
            if (!cell.formula || cell.formula->find('[') == std::string::npos) continue;
            try {
                for (const auto& t : formula::tokenize(*cell.formula)) {
                    if (t.kind != formula::TokenKind::CellRef && t.kind != formula::TokenKind::Identifier) continue;
                    const auto bang = t.lexeme.rfind('!');
                    const bool external = t.lexeme.front() == '[' ||
                                          (bang != std::string::npos && t.lexeme.substr(0, bang).find('[') != std::string::npos);
                    if (!external) continue;
                    ++report.external_references;
                    report.issues.push_back(IngestIssue{to_string(cell.address), "external-reference", t.lexeme});
                }
            } catch (const formula::FormulaError&) {
                // parse failures are tallied by the graph builder
            }
        }
    }
}

std::string ingest_report_json(const IngestReport& report) {
    json doc;
    doc["source"] = report.source;
    doc["externalReferences"] = report.external_references;
    doc["issues"] = json::array();
    for (const auto& i : report.issues)
        doc["issues"].push_back({{"location", i.location}, {"category", i.category}, {"message", i.message}});
    return doc.dump(2);
}

}  // namespace cellscope
