#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "timeraf/errors.hpp"

namespace timeraf {

// Streaming FNV-1a used as the trailing checksum of the TSKB/TSCK containers.
struct Fnv1a64 {
    std::uint64_t value = 14695981039346656037ULL;
    void feed(const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            value ^= bytes[i];
            value *= 1099511628211ULL;
        }
    }
};

// Little-endian writer that checksums everything written.
class BinWriter {
  public:
    explicit BinWriter(const std::string& path);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void bytes(const void* data, std::size_t n);
    void str(const std::string& s) { bytes(s.data(), s.size()); }
    std::uint64_t checksum() const { return hash_.value; }
    // Writes the running checksum (not fed back into itself) and closes.
    void finish_with_checksum();

  private:
    std::ofstream out_;
    Fnv1a64 hash_;
    void raw(const void* data, std::size_t n);
};

class BinReader {
  public:
    explicit BinReader(const std::string& path);
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string str(std::size_t n);
    void bytes(void* data, std::size_t n);
    std::uint64_t checksum() const { return hash_.value; }
    // Reads the trailing checksum, verifies it and that the file ends there.
    void verify_checksum();

  private:
    std::ifstream in_;
    Fnv1a64 hash_;
    void raw(void* data, std::size_t n);
};

}  // namespace timeraf
