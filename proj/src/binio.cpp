#include "vseg/binio.hpp"

#include <fstream>
#include <iterator>

namespace vseg::binio {

void Writer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

void Reader::require(std::size_t count, const char* field) const {
    if (remaining() < count)
        fail(std::string("truncated while reading ") + field + " (need " + std::to_string(count) + " bytes, " +
             std::to_string(remaining()) + " left)");
}

void Reader::fail(const std::string& message) const {
    throw FormatError(what_ + " at byte offset " + std::to_string(offset_) + ": " + message);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace vseg::binio
