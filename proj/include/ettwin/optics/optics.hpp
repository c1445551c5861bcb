#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ettwin/core/image.hpp"

namespace ettwin::optics {

/// One point in the optical design space. Exposure time is folded into
/// `brightness`; thermal and fixed-pattern noise are not modeled.
struct OpticsConfig {
    double brightness = 1.0;
    double blur_radius = 0.0;  // aperture disk PSF radius, px
    double read_sigma = 0.01;  // linear units
    double shot_gain = 0.0018; // variance per unit signal
    /// When set, replaces the signal-dependent model by flat Gaussian noise
    /// calibrated to this PSNR (dB) against a unit peak.
    std::optional<double> target_psnr;
    int quant_bits = 8;

    void validate() const;
    friend bool operator==(const OpticsConfig&, const OpticsConfig&) = default;
};

/// Square kernel, row major, odd side.
struct Kernel {
    int side = 1;
    std::vector<double> weights{1.0};

    int radius() const { return side / 2; }
    double at(int x, int y) const { return weights[static_cast<std::size_t>(y) * side + x]; }
    double sum() const;
};

LinearImage adjust_brightness(const LinearImage& img, double brightness);

/// Normalized aperture disk: side 2*ceil(radius)+1, ones where the pixel-center
/// distance to the kernel center is <= radius.
Kernel disk_psf(double radius);

/// Linear convolution through zero-padded FFTs, cropped to the input size.
/// Throws KernelTooLarge when the kernel side exceeds either image side.
LinearImage convolve(const LinearImage& img, const Kernel& psf);

/// Flat-noise sigma that yields `psnr_db` in expectation: peak * 10^(-psnr/20).
double sigma_for_target_psnr(double peak, double psnr_db);

/// Gaussian sensor noise. Each pixel draws from a counter-based generator
/// keyed by (seed, pixel index), so output is scheduling independent.
LinearImage add_noise(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed);

/// code = round_half_up(clamp(v, 0, 1) * 255).
QuantizedImage quantize(const LinearImage& img);
std::uint8_t quantize_value(float v);
LinearImage dequantize(const QuantizedImage& img);

/// 10 log10(peak^2 / MSE); nullopt when the images are identical (infinite PSNR).
std::optional<double> psnr(const LinearImage& reference, const LinearImage& test, double peak);

struct PipelineStages {
    LinearImage brightened;
    LinearImage blurred;
    LinearImage noisy;
    QuantizedImage output;
};

/// brightness -> blur -> noise -> quantization.
QuantizedImage apply_pipeline(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed);
/// Same as apply_pipeline, keeping every intermediate stage.
PipelineStages apply_pipeline_stages(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed);

}  // namespace ettwin::optics
