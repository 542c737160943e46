#pragma once

// Small DOM over expat, enough for OOXML parts and GraphML.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cellscope::xml {

class XmlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Element {
    std::string name;  // local name, namespace prefix stripped
    std::string qualified_name;
    std::map<std::string, std::string> attrs;  // local names
    std::string text;                          // concatenated character data
    std::vector<std::unique_ptr<Element>> children;

    const std::string* attr(const std::string& key) const {
        auto it = attrs.find(key);
        return it == attrs.end() ? nullptr : &it->second;
    }
    std::string attr_or(const std::string& key, std::string fallback = {}) const {
        auto* v = attr(key);
        return v ? *v : std::move(fallback);
    }
    const Element* child(std::string_view local) const;
    std::vector<const Element*> children_named(std::string_view local) const;
};

std::unique_ptr<Element> parse(std::string_view text);

std::string escape(std::string_view text);

}  // namespace cellscope::xml
