#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ettwin {

/// Single-channel linear-light raster, row major, 32-bit float.
///
/// Rendered images are finite and non-negative. After sensor noise is added
/// values may dip below zero; they are clamped only at quantization.
class LinearImage {
public:
    LinearImage() = default;
    LinearImage(int width, int height, float fill = 0.0f);
    LinearImage(int width, int height, std::vector<float> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }

    float& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<float> values() noexcept { return values_; }
    std::span<const float> values() const noexcept { return values_; }

    /// True when every value is finite and >= 0.
    bool is_valid_irradiance() const noexcept;
    float max_value() const noexcept;
    double mean() const noexcept;

    friend bool operator==(const LinearImage&, const LinearImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

/// 8-bit sensor output.
class QuantizedImage {
public:
    QuantizedImage() = default;
    QuantizedImage(int width, int height, std::uint8_t fill = 0);
    QuantizedImage(int width, int height, std::vector<std::uint8_t> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::uint8_t& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<std::uint8_t> values() noexcept { return values_; }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    friend bool operator==(const QuantizedImage&, const QuantizedImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> values_;
};

// ETLF: "ETLF", u32 LE width, u32 LE height, width*height f32 LE, row major.
std::vector<std::uint8_t> encode_etlf(const LinearImage& img);
LinearImage decode_etlf(std::span<const std::uint8_t> bytes);
void write_etlf(const std::filesystem::path& path, const LinearImage& img);
LinearImage read_etlf(const std::filesystem::path& path);

// Binary PGM, P5, maxval 255.
std::vector<std::uint8_t> encode_pgm(const QuantizedImage& img);
QuantizedImage decode_pgm(std::span<const std::uint8_t> bytes);
void write_pgm(const std::filesystem::path& path, const QuantizedImage& img);
QuantizedImage read_pgm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace ettwin
