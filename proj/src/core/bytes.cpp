#include "ioev/core/bytes.hpp"

#include <bit>
#include <cstring>

#include "ioev/core/error.hpp"

namespace ioev {

static_assert(std::endian::native == std::endian::little, "wire formats assume a little-endian host");

void ByteWriter::u32(uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::u64(uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::bytes(std::string_view b) { buf_.append(b); }

void ByteWriter::str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s);
}

void ByteWriter::f64s(std::span<const double> values) {
    buf_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

std::string_view ByteReader::bytes(size_t n) {
    if (remaining() < n) fail(ErrorCode::ParseError, "truncated binary payload");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

uint32_t ByteReader::u32() {
    uint32_t v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return v;
}

uint64_t ByteReader::u64() {
    uint64_t v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return v;
}

double ByteReader::f64() {
    double v;
    std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
    return v;
}

std::string ByteReader::str() {
    uint32_t n = u32();
    return std::string(bytes(n));
}

std::vector<double> ByteReader::f64s(size_t n) {
    if (n > remaining() / sizeof(double)) fail(ErrorCode::ParseError, "truncated f64 array");
    std::vector<double> out(n);
    std::memcpy(out.data(), bytes(n * sizeof(double)).data(), n * sizeof(double));
    return out;
}

}  // namespace ioev
