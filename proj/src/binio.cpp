#include "timeraf/binio.hpp"

#include <bit>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace timeraf {

BinWriter::BinWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open file for writing: " + path);
}

void BinWriter::raw(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("write failure");
}

void BinWriter::bytes(const void* data, std::size_t n) {
    raw(data, n);
    hash_.feed(data, n);
}

void BinWriter::u16(std::uint16_t v) { bytes(&v, sizeof v); }
void BinWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void BinWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinWriter::f32(float v) { bytes(&v, sizeof v); }
void BinWriter::f64(double v) { bytes(&v, sizeof v); }

void BinWriter::finish_with_checksum() {
    const std::uint64_t sum = hash_.value;
    raw(&sum, sizeof sum);
    out_.close();
    if (!out_) throw DataError("close failure");
}

BinReader::BinReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open file for reading: " + path);
}

void BinReader::raw(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        throw FormatError(FormatError::Code::truncated, "unexpected end of file");
}

void BinReader::bytes(void* data, std::size_t n) {
    raw(data, n);
    hash_.feed(data, n);
}

std::uint16_t BinReader::u16() {
    std::uint16_t v;
    bytes(&v, sizeof v);
    return v;
}
std::uint32_t BinReader::u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
}
std::uint64_t BinReader::u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
}
float BinReader::f32() {
    float v;
    bytes(&v, sizeof v);
    return v;
}
double BinReader::f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
}

std::string BinReader::str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
}

void BinReader::verify_checksum() {
    const std::uint64_t expected = hash_.value;
    std::uint64_t stored;
    raw(&stored, sizeof stored);
    if (stored != expected)
        throw FormatError(FormatError::Code::bad_checksum, "checksum mismatch");
    char extra;
    in_.read(&extra, 1);
    if (in_.gcount() != 0)
        throw FormatError(FormatError::Code::bad_checksum, "trailing bytes after checksum");
}

}  // namespace timeraf
