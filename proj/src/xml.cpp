#include "xml.hpp"

#include <expat.h>

namespace cellscope::xml {

namespace {

std::string local(const char* name) {
    std::string_view n(name);
    const auto colon = n.rfind(':');
    return std::string(colon == std::string_view::npos ? n : n.substr(colon + 1));
}

struct Builder {
    std::unique_ptr<Element> root;
    std::vector<Element*> stack;

    static void on_start(void* ud, const XML_Char* name, const XML_Char** atts) {
        auto* b = static_cast<Builder*>(ud);
        auto e = std::make_unique<Element>();
        e->qualified_name = name;
        e->name = local(name);
        for (int i = 0; atts[i]; i += 2) e->attrs[local(atts[i])] = atts[i + 1];
        Element* raw = e.get();
        if (b->stack.empty()) {
            b->root = std::move(e);
        } else {
            b->stack.back()->children.push_back(std::move(e));
        }
        b->stack.push_back(raw);
    }

    static void on_end(void* ud, const XML_Char*) { static_cast<Builder*>(ud)->stack.pop_back(); }

    static void on_text(void* ud, const XML_Char* s, int len) {
        auto* b = static_cast<Builder*>(ud);
        if (!b->stack.empty()) b->stack.back()->text.append(s, static_cast<std::size_t>(len));
    }
};

}  // namespace

const Element* Element::child(std::string_view n) const {
    for (const auto& c : children)
        if (c->name == n) return c.get();
    return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view n) const {
    std::vector<const Element*> out;
    for (const auto& c : children)
        if (c->name == n) out.push_back(c.get());
    return out;
}

std::unique_ptr<Element> parse(std::string_view text) {
    // Namespace-unaware parsing; prefixes are stripped by hand.
    XML_Parser p = XML_ParserCreate(nullptr);
    if (!p) throw XmlError("cannot create XML parser");
    Builder b;
    XML_SetUserData(p, &b);
    XML_SetElementHandler(p, &Builder::on_start, &Builder::on_end);
    XML_SetCharacterDataHandler(p, &Builder::on_text);
    const auto status = XML_Parse(p, text.data(), static_cast<int>(text.size()), XML_TRUE);
    if (status != XML_STATUS_OK) {
        std::string msg = std::string("XML error: ") + XML_ErrorString(XML_GetErrorCode(p)) + " at line " +
                          std::to_string(XML_GetCurrentLineNumber(p));
        XML_ParserFree(p);
        throw XmlError(msg);
    }
    XML_ParserFree(p);
    if (!b.root) throw XmlError("empty XML document");
    return std::move(b.root);
}

std::string escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            case '\t': out += "&#9;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace cellscope::xml
