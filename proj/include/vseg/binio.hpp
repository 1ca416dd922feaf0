#pragma once

// Little-endian byte buffers shared by the VSGD / VSGM / VSGW formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vseg/core.hpp"

namespace vseg::binio {

class Writer {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        U bits;
        std::memcpy(&bits, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }

    void put_bytes(std::string_view raw) { bytes_.append(raw); }

    const std::string& bytes() const { return bytes_; }
    void save(const std::filesystem::path& path) const;

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(std::string bytes, std::string what) : bytes_(std::move(bytes)), what_(std::move(what)) {}

    template <typename T>
    T get(const char* field) {
        static_assert(std::is_arithmetic_v<T>);
        require(sizeof(T), field);
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<U>(static_cast<std::uint8_t>(bytes_[offset_ + i])) << (8 * i);
        offset_ += sizeof(T);
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    }

    std::string_view get_bytes(std::size_t count, const char* field) {
        require(count, field);
        std::string_view out(bytes_.data() + offset_, count);
        offset_ += count;
        return out;
    }

    /// Throws unless `count` more bytes are available.
    void require(std::size_t count, const char* field) const;
    [[noreturn]] void fail(const std::string& message) const;

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

private:
    std::string bytes_;
    std::string what_;
    std::size_t offset_ = 0;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace vseg::binio
