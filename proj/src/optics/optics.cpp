#include "ettwin/optics/optics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>

#include <fftw3.h>

#include "ettwin/core/error.hpp"
#include "ettwin/core/seed.hpp"

namespace ettwin::optics {

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Smallest n >= min whose only prime factors are 2, 3, 5, 7.
int fft_friendly(int min) {
    for (int n = std::max(min, 1);; ++n) {
        int m = n;
        for (int p : {2, 3, 5, 7})
            while (m % p == 0) m /= p;
        if (m == 1) return n;
    }
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// Cached r2c/c2r plans for one padded size. Plans are created under the global
// planner lock; execution through the new-array interface is thread safe.
class FftPlan {
public:
    FftPlan(int rows, int cols) : rows_(rows), cols_(cols) {
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * real_size())));
        spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectrum_size())));
        std::lock_guard lock(fftw_planner_mutex());
        forward_ = fftw_plan_dft_r2c_2d(rows_, cols_, real_.get(), spec_.get(), FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_2d(rows_, cols_, spec_.get(), real_.get(), FFTW_ESTIMATE);
    }
    ~FftPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    std::size_t real_size() const { return static_cast<std::size_t>(rows_) * cols_; }
    std::size_t spectrum_size() const { return static_cast<std::size_t>(rows_) * (cols_ / 2 + 1); }

    void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(forward_, in, out); }
    void inverse(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(inverse_, in, out); }

private:
    int rows_, cols_;
    std::unique_ptr<double, FftwFree> real_;
    std::unique_ptr<fftw_complex, FftwFree> spec_;
    fftw_plan forward_{};
    fftw_plan inverse_{};
};

const FftPlan& plan_for(int rows, int cols) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
    auto& slot = cache[{rows, cols}];
    if (!slot) slot = std::make_unique<FftPlan>(rows, cols);
    return *slot;
}

template <class T>
using FftwBuffer = std::unique_ptr<T, FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

}  // namespace

void OpticsConfig::validate() const {
    if (!(brightness > 0.0)) throw Error(ErrorKind::Validation, "brightness must be > 0");
    if (!(blur_radius >= 0.0)) throw Error(ErrorKind::Validation, "blur_radius must be >= 0");
    if (!(read_sigma >= 0.0)) throw Error(ErrorKind::Validation, "read_sigma must be >= 0");
    if (!(shot_gain >= 0.0)) throw Error(ErrorKind::Validation, "shot_gain must be >= 0");
    if (target_psnr && !(*target_psnr > 0.0)) throw Error(ErrorKind::Validation, "target_psnr must be > 0 dB");
    if (quant_bits != 8) throw Error(ErrorKind::Validation, "only 8-bit quantization is supported");
}

double Kernel::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

LinearImage adjust_brightness(const LinearImage& img, double brightness) {
    if (!(brightness > 0.0)) throw Error(ErrorKind::Validation, "brightness must be > 0");
    LinearImage out = img;
    if (brightness == 1.0) return out;
    const auto b = static_cast<float>(brightness);
    for (float& v : out.values()) v *= b;
    return out;
}

Kernel disk_psf(double radius) {
    if (!(radius >= 0.0)) throw Error(ErrorKind::Validation, "PSF radius must be >= 0");
    const int r = static_cast<int>(std::ceil(radius));
    Kernel k;
    k.side = 2 * r + 1;
    k.weights.assign(static_cast<std::size_t>(k.side) * k.side, 0.0);
    std::size_t count = 0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
            if (std::sqrt(static_cast<double>(x * x + y * y)) <= radius) {
                k.weights[static_cast<std::size_t>(y + r) * k.side + (x + r)] = 1.0;
                ++count;
            }
    const double w = 1.0 / static_cast<double>(count);
    for (double& v : k.weights)
        if (v != 0.0) v = w;
    return k;
}

LinearImage convolve(const LinearImage& img, const Kernel& psf) {
    if (psf.side > img.width() || psf.side > img.height())
        throw Error(ErrorKind::KernelTooLarge, "kernel larger than image");
    if (std::abs(psf.sum() - 1.0) > 1e-9) throw Error(ErrorKind::Validation, "kernel must be normalized to sum 1");
    if (psf.side == 1) {
        LinearImage out = img;
        const auto w = static_cast<float>(psf.weights[0]);
        for (float& v : out.values()) v *= w;
        return out;
    }
    const int r = psf.radius();
    const int w = img.width(), h = img.height();
    // Padding by the kernel radius keeps circular wrap-around out of the crop.
    const int rows = fft_friendly(h + r);
    const int cols = fft_friendly(w + r);
    const FftPlan& plan = plan_for(rows, cols);

    auto image = fftw_buffer<double>(plan.real_size());
    auto kernel = fftw_buffer<double>(plan.real_size());
    auto image_hat = fftw_buffer<fftw_complex>(plan.spectrum_size());
    auto kernel_hat = fftw_buffer<fftw_complex>(plan.spectrum_size());
    std::fill_n(image.get(), plan.real_size(), 0.0);
    std::fill_n(kernel.get(), plan.real_size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) image.get()[static_cast<std::size_t>(y) * cols + x] = img.at(x, y);
    // Kernel center goes to index (0, 0); negative offsets wrap to the far end.
    for (int ky = 0; ky < psf.side; ++ky)
        for (int kx = 0; kx < psf.side; ++kx) {
            const int y = (ky - r + rows) % rows;
            const int x = (kx - r + cols) % cols;
            kernel.get()[static_cast<std::size_t>(y) * cols + x] = psf.at(kx, ky);
        }
    plan.forward(image.get(), image_hat.get());
    plan.forward(kernel.get(), kernel_hat.get());
    const double scale = 1.0 / static_cast<double>(plan.real_size());
    for (std::size_t i = 0; i < plan.spectrum_size(); ++i) {
        const std::complex<double> a(image_hat.get()[i][0], image_hat.get()[i][1]);
        const std::complex<double> b(kernel_hat.get()[i][0], kernel_hat.get()[i][1]);
        const auto c = a * b * scale;
        image_hat.get()[i][0] = c.real();
        image_hat.get()[i][1] = c.imag();
    }
    plan.inverse(image_hat.get(), image.get());

    LinearImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = static_cast<float>(image.get()[static_cast<std::size_t>(y) * cols + x]);
    return out;
}

double sigma_for_target_psnr(double peak, double psnr_db) {
    if (!(peak > 0.0) || !(psnr_db > 0.0)) throw Error(ErrorKind::Validation, "peak and psnr must be positive");
    return peak * std::pow(10.0, -psnr_db / 20.0);
}

LinearImage add_noise(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    LinearImage out = img;
    auto values = out.values();
    if (cfg.target_psnr) {
        const double sigma = sigma_for_target_psnr(1.0, *cfg.target_psnr);
        for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = static_cast<float>(values[i] + sigma * counter_normal(seed, i));
        return out;
    }
    if (cfg.read_sigma == 0.0 && cfg.shot_gain == 0.0) return out;
    const double read2 = cfg.read_sigma * cfg.read_sigma;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        const double sigma = std::sqrt(read2 + cfg.shot_gain * std::max(v, 0.0));
        values[i] = static_cast<float>(v + sigma * counter_normal(seed, i));
    }
    return out;
}

std::uint8_t quantize_value(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

QuantizedImage quantize(const LinearImage& img) {
    std::vector<std::uint8_t> codes(img.size());
    std::transform(img.values().begin(), img.values().end(), codes.begin(), quantize_value);
    return QuantizedImage(img.width(), img.height(), std::move(codes));
}

LinearImage dequantize(const QuantizedImage& img) {
    std::vector<float> values(img.size());
    std::transform(img.values().begin(), img.values().end(), values.begin(),
                   [](std::uint8_t c) { return static_cast<float>(c / 255.0); });
    return LinearImage(img.width(), img.height(), std::move(values));
}

std::optional<double> psnr(const LinearImage& reference, const LinearImage& test, double peak) {
    if (reference.width() != test.width() || reference.height() != test.height())
        throw Error(ErrorKind::Validation, "psnr needs images of equal size");
    if (!(peak > 0.0)) throw Error(ErrorKind::Validation, "psnr peak must be positive");
    double sse = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = static_cast<double>(reference.values()[i]) - test.values()[i];
        sse += d * d;
    }
    if (sse == 0.0) return std::nullopt;
    const double mse = sse / static_cast<double>(reference.size());
    return 10.0 * std::log10(peak * peak / mse);
}

PipelineStages apply_pipeline_stages(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PipelineStages s;
    s.brightened = adjust_brightness(img, cfg.brightness);
    s.blurred = cfg.blur_radius > 0.0 ? convolve(s.brightened, disk_psf(cfg.blur_radius)) : s.brightened;
    s.noisy = add_noise(s.blurred, cfg, seed);
    s.output = quantize(s.noisy);
    return s;
}

QuantizedImage apply_pipeline(const LinearImage& img, const OpticsConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    LinearImage x = adjust_brightness(img, cfg.brightness);
    if (cfg.blur_radius > 0.0) x = convolve(x, disk_psf(cfg.blur_radius));
    x = add_noise(x, cfg, seed);
    return quantize(x);
}

}  // namespace ettwin::optics
