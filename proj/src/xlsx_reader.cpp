#include "workbook.hpp"

#include "formula/formula.hpp"
#include "xml.hpp"
#include "zip_reader.hpp"

#include <cstdlib>
#include <map>

namespace cellscope {

namespace {

struct SheetRef {
    std::string name;
    std::string part;  // zip entry name
};

std::string resolve_target(const std::string& target) {
    if (!target.empty() && target.front() == '/') return target.substr(1);
    return "xl/" + target;
}

std::string string_item_text(const xml::Element& si) {
    if (const auto* t = si.child("t")) return t->text;
    std::string out;
    for (const auto* r : si.children_named("r"))
        if (const auto* t = r->child("t")) out += t->text;
    return out;
}

struct SharedMaster {
    std::string formula;
    int row = 0;
    int col = 0;
};

std::pair<int, int> split_ref(const std::string& r) {
    auto region = formula::parse_region(r);
    if (!region || region->kind != formula::RefKind::Cell) throw std::invalid_argument("bad cell reference '" + r + "'");
    return {region->first.row, region->first.col};
}

void read_sheet(const std::string& xml_text, const std::string& sheet_name, const std::vector<std::string>& strings,
                Workbook& wb, IngestReport& report) {
    auto root = xml::parse(xml_text);
    const auto* data = root->child("sheetData");
    if (!data) return;
    std::map<std::string, SharedMaster> shared;

    for (const auto* row : data->children_named("row")) {
        for (const auto* c : row->children_named("c")) {
            const std::string ref = c->attr_or("r");
            try {
                const auto [r, col] = split_ref(ref);
                Cell cell{CellAddress{sheet_name, r, col}, Blank{}, std::nullopt};

                if (const auto* f = c->child("f")) {
                    const std::string kind = f->attr_or("t");
                    if (kind == "shared") {
                        const std::string si = f->attr_or("si");
                        if (!f->text.empty()) {
                            shared[si] = SharedMaster{f->text, r, col};
                            cell.formula = f->text;
                        } else {
                            auto it = shared.find(si);
                            if (it == shared.end()) throw std::invalid_argument("shared formula " + si + " without master");
                            cell.formula = formula::shift_formula(it->second.formula, r - it->second.row,
                                                                  col - it->second.col);
                        }
                    } else if (!f->text.empty()) {
                        cell.formula = f->text;
                    }
                }

                const std::string type = c->attr_or("t", "n");
                const auto* v = c->child("v");
                if (type == "inlineStr") {
                    if (const auto* is = c->child("is")) cell.value = string_item_text(*is);
                } else if (v) {
                    const std::string& vt = v->text;
                    if (type == "s") {
                        const long idx = std::strtol(vt.c_str(), nullptr, 10);
                        if (idx < 0 || static_cast<std::size_t>(idx) >= strings.size())
                            throw std::invalid_argument("shared string index out of range");
                        cell.value = strings[static_cast<std::size_t>(idx)];
                    } else if (type == "str" || type == "d") {
                        cell.value = vt;
                    } else if (type == "b") {
                        cell.value = vt == "1";
                    } else if (type == "e") {
                        cell.value = ErrorLiteral{vt};
                    } else if (!vt.empty()) {
                        char* end = nullptr;
                        const double d = std::strtod(vt.c_str(), &end);
                        if (end == vt.c_str()) throw std::invalid_argument("non-numeric value '" + vt + "'");
                        cell.value = d;
                    }
                }
                if (cell.non_blank()) wb.set_cell(std::move(cell));
            } catch (const std::exception& e) {
                report.issues.push_back(IngestIssue{sheet_name + "!" + ref, "bad-cell", e.what()});
            }
        }
    }
}

}  // namespace

LoadResult read_xlsx(const std::filesystem::path& path) {
    LoadResult out;
    out.report.source = path.string();
    try {
        ZipArchive zip(path);
        if (!zip.contains("xl/workbook.xml")) throw WorkbookError(path, "unsupported format: no xl/workbook.xml part");

        std::map<std::string, std::string> rels;
        if (zip.contains("xl/_rels/workbook.xml.rels")) {
            auto relroot = xml::parse(zip.read("xl/_rels/workbook.xml.rels"));
            for (const auto* r : relroot->children_named("Relationship")) rels[r->attr_or("Id")] = r->attr_or("Target");
        }

        std::vector<std::string> strings;
        if (zip.contains("xl/sharedStrings.xml")) {
            auto sroot = xml::parse(zip.read("xl/sharedStrings.xml"));
            for (const auto* si : sroot->children_named("si")) strings.push_back(string_item_text(*si));
        }

        auto wbroot = xml::parse(zip.read("xl/workbook.xml"));
        std::vector<SheetRef> sheets;
        if (const auto* ss = wbroot->child("sheets")) {
            for (const auto* s : ss->children_named("sheet")) {
                const std::string rid = s->attr_or("id");
                auto it = rels.find(rid);
                if (it == rels.end()) {
                    out.report.issues.push_back(IngestIssue{s->attr_or("name"), "missing-sheet-part", "no relationship " + rid});
                    continue;
                }
                sheets.push_back(SheetRef{s->attr_or("name"), resolve_target(it->second)});
            }
        }

        for (const auto& s : sheets) {
            out.workbook.add_sheet(s.name);
            if (!zip.contains(s.part)) {
                out.report.issues.push_back(IngestIssue{s.name, "missing-sheet-part", s.part});
                continue;
            }
            try {
                read_sheet(zip.read(s.part), s.name, strings, out.workbook, out.report);
            } catch (const std::exception& e) {
                out.report.issues.push_back(IngestIssue{s.name, "bad-sheet", e.what()});
            }
        }

        if (const auto* dn = wbroot->child("definedNames")) {
            for (const auto* d : dn->children_named("definedName")) {
                const std::string name = d->attr_or("name");
                if (name.rfind("_xlnm.", 0) == 0) continue;  // print areas and other built-ins
                if (d->text.find('[') != std::string::npos) {
                    ++out.report.external_references;
                    out.report.issues.push_back(IngestIssue{"namedRange:" + name, "external-reference", d->text});
                    continue;
                }
                try {
                    out.workbook.add_named_range(name, d->text);
                } catch (const std::exception& e) {
                    out.report.issues.push_back(IngestIssue{"namedRange:" + name, "bad-named-range", e.what()});
                }
            }
        }
        scan_external_references(out.workbook, out.report);
    } catch (const WorkbookError&) {
        throw;
    } catch (const ZipError& e) {
        throw WorkbookError(path, std::string("unreadable xlsx container: ") + e.what());
    } catch (const xml::XmlError& e) {
        throw WorkbookError(path, std::string("malformed workbook part: ") + e.what());
    }
    return out;
}

}  // namespace cellscope
