#include "hybridaug/raster.hpp"

#include "hybridaug/error.hpp"
#include "hybridaug/kernels/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hybridaug {
namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw InvalidArgument("raster dimensions must be at least 1x1, got " +
                              std::to_string(width) + "x" + std::to_string(height));
    }
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

// cos/sin with exact values on multiples of 90 degrees.
std::array<double, 2> rotation_terms(double degrees) {
    double wrapped = std::fmod(degrees, 360.0);
    if (wrapped < 0) wrapped += 360.0;
    if (wrapped == 0.0) return {1.0, 0.0};
    if (wrapped == 90.0) return {0.0, 1.0};
    if (wrapped == 180.0) return {-1.0, 0.0};
    if (wrapped == 270.0) return {0.0, -1.0};
    const double rad = wrapped * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad)};
}

double bilinear(const Raster& img, double fx, double fy, int c) {
    const int w = img.width();
    const int h = img.height();
    const double x0f = std::floor(fx);
    const double y0f = std::floor(fy);
    const double tx = fx - x0f;
    const double ty = fy - y0f;
    const int x0 = std::clamp(static_cast<int>(x0f), 0, w - 1);
    const int y0 = std::clamp(static_cast<int>(y0f), 0, h - 1);
    const int x1 = std::clamp(static_cast<int>(x0f) + 1, 0, w - 1);
    const int y1 = std::clamp(static_cast<int>(y0f) + 1, 0, h - 1);
    const double top = (1.0 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c);
    const double bottom = (1.0 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c);
    return (1.0 - ty) * top + ty * bottom;
}

Raster extract(const Raster& img, int x, int y, int width, int height) {
    Raster out(width, height, img.channels());
    for (int row = 0; row < height; ++row)
        for (int col = 0; col < width; ++col)
            for (int c = 0; c < img.channels(); ++c) out.at(col, row, c) = img.at(x + col, y + row, c);
    return out;
}

void check_window(const Raster& img, int x, int y, int width, int height, const char* op) {
    if (width < 1 || height < 1 || x < 0 || y < 0 || x + width > img.width() ||
        y + height > img.height()) {
        std::ostringstream msg;
        msg << op << " window (" << x << "," << y << "," << width << "x" << height
            << ") is outside the " << img.width() << "x" << img.height() << " image";
        throw InvalidArgument(msg.str());
    }
}

// Per-axis coverage of source cells by each output cell.
struct Coverage {
    int first = 0;
    std::vector<double> weights;
};

std::vector<Coverage> area_coverage(int src, int dst) {
    std::vector<Coverage> out(dst);
    const double ratio = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        const double lo = i * ratio;
        const double hi = (i + 1) * ratio;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
        out[i].first = first;
        for (int s = first; s <= last; ++s) {
            const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
            out[i].weights.push_back(std::max(0.0, overlap) / ratio);
        }
    }
    return out;
}

}  // namespace

Raster::Raster(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
    check_dims(width, height);
    if (channels != 1 && channels != 3) throw InvalidArgument("raster channels must be 1 or 3");
    pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Raster::Raster(int width, int height, int channels, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    check_dims(width, height);
    if (channels != 1 && channels != 3) throw InvalidArgument("raster channels must be 1 or 3");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels)
        throw InvalidArgument("raster pixel buffer does not match width x height x channels");
}

Mask::Mask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    check_dims(width, height);
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    check_dims(width, height);
    if (bits_.size() != static_cast<std::size_t>(width) * height)
        throw InvalidArgument("mask buffer does not match width x height");
    if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; }))
        throw InvalidArgument("mask values must be 0 or 1");
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void validate_scale(const AffineParams& params) {
    if (!(params.p > 0.0) || !(params.q > 0.0) || !std::isfinite(params.p) ||
        !std::isfinite(params.q) || !std::isfinite(params.theta_deg)) {
        std::ostringstream msg;
        msg << "affine scale factors must be finite and positive (p=" << params.p
            << ", q=" << params.q << ", theta=" << params.theta_deg << ")";
        throw InvalidArgument(msg.str());
    }
}

Raster to_grayscale(const Raster& img) {
    if (img.channels() != 3)
        throw InvalidArgument("to_grayscale expects a 3-channel raster, got " +
                              std::to_string(img.channels()) + " channel(s)");
    Raster out(img.width(), img.height(), 1);
    const auto src = img.pixels();
    auto dst = out.pixels();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        const double lum = 0.299 * src[3 * k] + 0.587 * src[3 * k + 1] + 0.114 * src[3 * k + 2];
        dst[k] = quantize(lum);
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw InvalidArgument("gaussian sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> weights(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        weights[k + radius] = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        total += weights[k + radius];
    }
    for (double& w : weights) w /= total;
    return weights;
}

Raster gaussian_blur(const Raster& img, double sigma) {
    const std::vector<double> weights = gaussian_kernel(sigma);
    const int radius = static_cast<int>(weights.size() / 2);
    const int w = img.width();
    const int h = img.height();
    const int channels = img.channels();
    const auto& kern = kernels::active_kernels();

    Raster out(w, h, channels);
    std::vector<double> padded(static_cast<std::size_t>(w) + 2 * radius);
    std::vector<double> plane(static_cast<std::size_t>(w) * h);
    std::vector<double> result(w);
    std::vector<const double*> rows(weights.size());

    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = -radius; x < w + radius; ++x)
                padded[x + radius] = img.at(std::clamp(x, 0, w - 1), y, c);
            kern.convolve_row(padded.data(), w, weights.data(), weights.size(),
                              plane.data() + static_cast<std::size_t>(y) * w);
        }
        for (int y = 0; y < h; ++y) {
            for (int k = -radius; k <= radius; ++k)
                rows[k + radius] = plane.data() + static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w;
            kern.convolve_columns(rows.data(), w, weights.data(), weights.size(), result.data());
            for (int x = 0; x < w; ++x) out.at(x, y, c) = quantize(result[x]);
        }
    }
    return out;
}

Mask binarize(const Raster& img, int threshold, Polarity polarity) {
    if (img.channels() != 1) throw InvalidArgument("binarize expects a 1-channel raster");
    if (threshold < 0 || threshold > 255)
        throw InvalidArgument("binarize threshold must lie in [0, 255]");
    std::vector<std::uint8_t> bits(img.pixels().size());
    const auto src = img.pixels();
    for (std::size_t k = 0; k < bits.size(); ++k) {
        bits[k] = polarity == Polarity::DefectDark ? (src[k] < threshold) : (src[k] > threshold);
    }
    return Mask(img.width(), img.height(), std::move(bits));
}

int otsu_threshold(const Raster& img) {
    if (img.channels() != 1) throw InvalidArgument("otsu_threshold expects a 1-channel raster");
    std::array<double, 256> hist{};
    for (std::uint8_t v : img.pixels()) hist[v] += 1.0;
    const double total = static_cast<double>(img.pixels().size());
    double sum_all = 0.0;
    for (int t = 0; t < 256; ++t) sum_all += t * hist[t];

    double weight_low = 0.0;
    double sum_low = 0.0;
    double best = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        weight_low += hist[t];
        sum_low += t * hist[t];
        const double weight_high = total - weight_low;
        if (weight_low == 0.0 || weight_high == 0.0) continue;
        const double mean_low = sum_low / weight_low;
        const double mean_high = (sum_all - sum_low) / weight_high;
        const double between = weight_low * weight_high * (mean_low - mean_high) * (mean_low - mean_high);
        if (between > best) {
            best = between;
            best_t = t;
        }
    }
    return best_t;
}

PixelPoint warped_extent(int width, int height, const AffineParams& params) {
    validate_scale(params);
    const auto [c, s] = rotation_terms(params.theta_deg);
    const double sw = params.p * width;
    const double sh = params.q * height;
    const double out_w = std::abs(sw * c) + std::abs(sh * s);
    const double out_h = std::abs(sw * s) + std::abs(sh * c);
    return {static_cast<int>(std::llround(out_w)), static_cast<int>(std::llround(out_h))};
}

WarpResult warp(const Raster& img, const Mask& mask, const AffineParams& params) {
    if (img.width() != mask.width() || img.height() != mask.height())
        throw InvalidArgument("warp: raster and mask dimensions differ");
    const PixelPoint extent = warped_extent(img.width(), img.height(), params);
    if (extent.x < 1 || extent.y < 1) {
        std::ostringstream msg;
        msg << "warp output is degenerate (" << extent.x << "x" << extent.y << ") for p=" << params.p
            << ", q=" << params.q << ", theta=" << params.theta_deg;
        throw InvalidArgument(msg.str());
    }
    const auto [c, s] = rotation_terms(params.theta_deg);
    const int w = img.width();
    const int h = img.height();
    const double half_w = w / 2.0;
    const double half_h = h / 2.0;
    const double out_half_w = extent.x / 2.0;
    const double out_half_h = extent.y / 2.0;

    WarpResult result{Raster(extent.x, extent.y, img.channels()), Mask(extent.x, extent.y)};
    for (int oy = 0; oy < extent.y; ++oy) {
        for (int ox = 0; ox < extent.x; ++ox) {
            const double rx = ox + 0.5 - out_half_w;
            const double ry = oy + 0.5 - out_half_h;
            // Inverse rotation, then inverse scale.
            const double sx = (rx * c - ry * s) / params.p + half_w;
            const double sy = (rx * s + ry * c) / params.q + half_h;
            if (!(sx >= 0.0 && sx < w && sy >= 0.0 && sy < h)) continue;
            result.mask.set(ox, oy, mask.at(static_cast<int>(sx), static_cast<int>(sy)) != 0);
            for (int ch = 0; ch < img.channels(); ++ch)
                result.image.at(ox, oy, ch) = quantize(bilinear(img, sx - 0.5, sy - 0.5, ch));
        }
    }
    return result;
}

Raster resize_bilinear(const Raster& img, int width, int height) {
    check_dims(width, height);
    Raster out(width, height, img.channels());
    const double rx = static_cast<double>(img.width()) / width;
    const double ry = static_cast<double>(img.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = (y + 0.5) * ry - 0.5;
        for (int x = 0; x < width; ++x) {
            const double fx = (x + 0.5) * rx - 0.5;
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = quantize(bilinear(img, fx, fy, c));
        }
    }
    return out;
}

std::vector<double> resize_area(const Raster& img, int width, int height) {
    check_dims(width, height);
    const auto cols = area_coverage(img.width(), width);
    const auto rows = area_coverage(img.height(), height);
    const int channels = img.channels();
    std::vector<double> out(static_cast<std::size_t>(width) * height * channels, 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < rows[y].weights.size(); ++j) {
                    double row_acc = 0.0;
                    for (std::size_t i = 0; i < cols[x].weights.size(); ++i)
                        row_acc += cols[x].weights[i] *
                                   img.at(cols[x].first + static_cast<int>(i), rows[y].first + static_cast<int>(j), c);
                    acc += rows[y].weights[j] * row_acc;
                }
                out[(static_cast<std::size_t>(y) * width + x) * channels + c] = acc;
            }
        }
    }
    return out;
}

Raster resize_area_rounded(const Raster& img, int width, int height) {
    const std::vector<double> values = resize_area(img, width, height);
    Raster out(width, height, img.channels());
    auto dst = out.pixels();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = quantize(values[k]);
    return out;
}

Raster augment(const Raster& img, const AugmentOp& op) {
    using namespace augment_ops;
    return std::visit(
        [&img](const auto& o) -> Raster {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Crop>) {
                check_window(img, o.x, o.y, o.width, o.height, "crop");
                return extract(img, o.x, o.y, o.width, o.height);
            } else if constexpr (std::is_same_v<T, Clip>) {
                check_window(img, o.x, o.y, o.width, o.height, "clip");
                return resize_bilinear(extract(img, o.x, o.y, o.width, o.height), img.width(), img.height());
            } else if constexpr (std::is_same_v<T, Zoom>) {
                if (!(o.factor > 0.0) || !std::isfinite(o.factor))
                    throw InvalidArgument("zoom factor must be positive");
                const int w = static_cast<int>(std::llround(img.width() * o.factor));
                const int h = static_cast<int>(std::llround(img.height() * o.factor));
                if (w < 1 || h < 1) throw InvalidArgument("zoom factor collapses the image");
                return resize_bilinear(img, w, h);
            } else if constexpr (std::is_same_v<T, Translate>) {
                if (std::abs(o.dx) >= img.width() || std::abs(o.dy) >= img.height())
                    throw InvalidArgument("translation moves the image off the canvas");
                Raster out(img.width(), img.height(), img.channels());
                for (int y = 0; y < img.height(); ++y)
                    for (int x = 0; x < img.width(); ++x)
                        for (int c = 0; c < img.channels(); ++c)
                            out.at(x, y, c) = img.at(std::clamp(x - o.dx, 0, img.width() - 1),
                                                     std::clamp(y - o.dy, 0, img.height() - 1), c);
                return out;
            } else {
                if (!std::isfinite(o.degrees)) throw InvalidArgument("rotation angle must be finite");
                const auto [c, s] = rotation_terms(o.degrees);
                const double hw = img.width() / 2.0;
                const double hh = img.height() / 2.0;
                Raster out(img.width(), img.height(), img.channels());
                for (int y = 0; y < img.height(); ++y) {
                    for (int x = 0; x < img.width(); ++x) {
                        const double rx = x + 0.5 - hw;
                        const double ry = y + 0.5 - hh;
                        const double sx = rx * c - ry * s + hw;
                        const double sy = rx * s + ry * c + hh;
                        for (int ch = 0; ch < img.channels(); ++ch)
                            out.at(x, y, ch) = quantize(bilinear(img, sx - 0.5, sy - 0.5, ch));
                    }
                }
                return out;
            }
        },
        op);
}

std::string describe(const AugmentOp& op) {
    using namespace augment_ops;
    std::ostringstream out;
    std::visit(
        [&out](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Crop> || std::is_same_v<T, Clip>) {
                out << (std::is_same_v<T, Crop> ? "crop" : "clip") << "(" << o.x << "," << o.y << ","
                    << o.width << "x" << o.height << ")";
            } else if constexpr (std::is_same_v<T, Zoom>) {
                out << "zoom(" << o.factor << ")";
            } else if constexpr (std::is_same_v<T, Translate>) {
                out << "translate(" << o.dx << "," << o.dy << ")";
            } else {
                out << "rotate(" << o.degrees << ")";
            }
        },
        op);
    return out.str();
}

}  // namespace hybridaug
