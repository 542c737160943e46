#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellscope {

class ZipError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Minimal reader for the zip container of OOXML files: central directory,
// stored and deflated entries. No zip64, no encryption.
class ZipArchive {
public:
    explicit ZipArchive(const std::filesystem::path& path);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    std::string read(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    struct Entry {
        std::uint16_t method = 0;
        std::uint32_t crc = 0;
        std::uint32_t compressed = 0;
        std::uint32_t size = 0;
        std::uint32_t local_offset = 0;
    };
    std::string data_;
    std::map<std::string, Entry> entries_;
};

}  // namespace cellscope
