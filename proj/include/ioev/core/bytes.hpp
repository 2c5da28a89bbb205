#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ioev {

// Little-endian append-only encoder used by checkpoints and the FL wire format.
class ByteWriter {
public:
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f64(double v);
    void bytes(std::string_view b);
    // u32 length prefix followed by the raw bytes.
    void str(std::string_view s);
    void f64s(std::span<const double> values);

    const std::string& data() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    uint32_t u32();
    uint64_t u64();
    double f64();
    std::string_view bytes(size_t n);
    std::string str();
    std::vector<double> f64s(size_t n);

    size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view data_;
    size_t pos_ = 0;
};

}  // namespace ioev
