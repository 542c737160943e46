#include "zip_reader.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

namespace cellscope {

namespace {

std::uint16_t u16(const std::string& d, std::size_t at) {
    if (at + 2 > d.size()) throw ZipError("truncated zip structure");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(d[at]) | (static_cast<unsigned char>(d[at + 1]) << 8));
}

std::uint32_t u32(const std::string& d, std::size_t at) {
    return static_cast<std::uint32_t>(u16(d, at)) | (static_cast<std::uint32_t>(u16(d, at + 2)) << 16);
}

constexpr std::uint32_t kEndOfCentralDir = 0x06054b50;
constexpr std::uint32_t kCentralHeader = 0x02014b50;
constexpr std::uint32_t kLocalHeader = 0x04034b50;

}  // namespace

ZipArchive::ZipArchive(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ZipError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    data_ = ss.str();
    if (data_.size() < 22) throw ZipError("not a zip archive");

    // The end record sits within the last 64 KiB + 22 bytes.
    std::size_t eocd = std::string::npos;
    const std::size_t lowest = data_.size() > 65557 ? data_.size() - 65557 : 0;
    for (std::size_t p = data_.size() - 22 + 1; p-- > lowest;) {
        if (u32(data_, p) == kEndOfCentralDir) {
            eocd = p;
            break;
        }
    }
    if (eocd == std::string::npos) throw ZipError("not a zip archive (no end of central directory)");

    const std::uint16_t count = u16(data_, eocd + 10);
    std::size_t p = u32(data_, eocd + 16);
    for (std::uint16_t i = 0; i < count; ++i) {
        if (u32(data_, p) != kCentralHeader) throw ZipError("corrupt central directory");
        Entry e;
        const std::uint16_t flags = u16(data_, p + 8);
        if (flags & 0x1) throw ZipError("encrypted zip entries are not supported");
        e.method = u16(data_, p + 10);
        e.crc = u32(data_, p + 16);
        e.compressed = u32(data_, p + 20);
        e.size = u32(data_, p + 24);
        const std::uint16_t name_len = u16(data_, p + 28);
        const std::uint16_t extra_len = u16(data_, p + 30);
        const std::uint16_t comment_len = u16(data_, p + 32);
        e.local_offset = u32(data_, p + 42);
        if (e.compressed == 0xFFFFFFFFu || e.size == 0xFFFFFFFFu) throw ZipError("zip64 archives are not supported");
        if (p + 46 + name_len > data_.size()) throw ZipError("truncated central directory");
        entries_[data_.substr(p + 46, name_len)] = e;
        p += 46u + name_len + extra_len + comment_len;
    }
}

std::vector<std::string> ZipArchive::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::string ZipArchive::read(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ZipError("missing zip entry " + name);
    const Entry& e = it->second;
    const std::size_t lh = e.local_offset;
    if (u32(data_, lh) != kLocalHeader) throw ZipError("corrupt local header for " + name);
    const std::size_t start = lh + 30u + u16(data_, lh + 26) + u16(data_, lh + 28);
    if (start + e.compressed > data_.size()) throw ZipError("truncated entry " + name);

    std::string out;
    if (e.method == 0) {
        out = data_.substr(start, e.compressed);
    } else if (e.method == 8) {
        out.resize(e.size);
        z_stream zs{};
        if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ZipError("inflateInit failed");
        zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data_.data() + start));
        zs.avail_in = e.compressed;
        zs.next_out = reinterpret_cast<Bytef*>(out.data());
        zs.avail_out = e.size;
        const int rc = inflate(&zs, Z_FINISH);
        inflateEnd(&zs);
        if (rc != Z_STREAM_END || zs.total_out != e.size) throw ZipError("inflate failed for " + name);
    } else {
        throw ZipError("unsupported compression method " + std::to_string(e.method) + " for " + name);
    }
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
    if (crc != e.crc) throw ZipError("crc mismatch for " + name);
    return out;
}

}  // namespace cellscope
