#include "ettwin/core/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ettwin/core/error.hpp"

namespace ettwin {

namespace {

void check_dims(int width, int height, std::size_t n) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "image dimensions must be positive");
    if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw Error(ErrorKind::Validation, "image buffer length does not match width x height");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
    return v;
}

}  // namespace

LinearImage::LinearImage(int width, int height, float fill)
    : LinearImage(width, height,
                  std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill)) {}

LinearImage::LinearImage(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width_, height_, values_.size());
}

bool LinearImage::is_valid_irradiance() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v) && v >= 0.0f; });
}

float LinearImage::max_value() const noexcept {
    return values_.empty() ? 0.0f : *std::max_element(values_.begin(), values_.end());
}

double LinearImage::mean() const noexcept {
    if (values_.empty()) return 0.0;
    double s = 0.0;
    for (float v : values_) s += v;
    return s / static_cast<double>(values_.size());
}

QuantizedImage::QuantizedImage(int width, int height, std::uint8_t fill)
    : QuantizedImage(width, height,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill)) {}

QuantizedImage::QuantizedImage(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width_, height_, values_.size());
}

std::vector<std::uint8_t> encode_etlf(const LinearImage& img) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + img.size() * 4);
    out.insert(out.end(), {'E', 'T', 'L', 'F'});
    put_u32(out, static_cast<std::uint32_t>(img.width()));
    put_u32(out, static_cast<std::uint32_t>(img.height()));
    for (float v : img.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

LinearImage decode_etlf(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "ETLF", 4) != 0)
        throw Error(ErrorKind::Io, "not an ETLF stream (bad magic)");
    const auto w = get_u32(bytes, 4);
    const auto h = get_u32(bytes, 8);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (w == 0 || h == 0 || bytes.size() != 12 + n * 4)
        throw Error(ErrorKind::Io, "ETLF payload length does not match header");
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
    return LinearImage(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

std::vector<std::uint8_t> encode_pgm(const QuantizedImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.values().begin(), img.values().end());
    return out;
}

QuantizedImage decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        long v = 0;
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start) throw Error(ErrorKind::Io, "malformed PGM header");
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw Error(ErrorKind::Io, "not a binary PGM (P5)");
    pos = 2;
    const long w = read_int();
    const long h = read_int();
    const long maxval = read_int();
    if (maxval != 255) throw Error(ErrorKind::Io, "only maxval 255 PGM is supported");
    ++pos;  // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (w <= 0 || h <= 0 || bytes.size() < pos + n) throw Error(ErrorKind::Io, "truncated PGM payload");
    return QuantizedImage(static_cast<int>(w), static_cast<int>(h),
                          std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + n));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open for reading: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void write_etlf(const std::filesystem::path& path, const LinearImage& img) { write_file_bytes(path, encode_etlf(img)); }
LinearImage read_etlf(const std::filesystem::path& path) { return decode_etlf(read_file_bytes(path)); }
void write_pgm(const std::filesystem::path& path, const QuantizedImage& img) { write_file_bytes(path, encode_pgm(img)); }
QuantizedImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path)); }

}  // namespace ettwin
