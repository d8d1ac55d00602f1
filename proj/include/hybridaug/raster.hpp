#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hybridaug {

/// Row-major 8-bit image with 1 (grayscale) or 3 (RGB) interleaved channels.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, int channels, std::uint8_t fill = 0);
    Raster(int width, int height, int channels, std::vector<std::uint8_t> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return pixels_.empty(); }

    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels_[index(x, y, c)];
    }
    std::uint8_t& at(int x, int y, int c = 0) { return pixels_[index(x, y, c)]; }

    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<std::uint8_t> pixels() noexcept { return pixels_; }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Binary defect mask; every stored value is exactly 0 or 1.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, std::uint8_t fill = 0);
    Mask(int width, int height, std::vector<std::uint8_t> bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    std::uint8_t at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, bool on) { bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::size_t count() const noexcept;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct PixelPoint {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Placement of a defect patch: scale x by `p`, y by `q`, rotate
/// counterclockwise by `theta_deg` about the patch center, then center the
/// result on `center` in the background frame.
struct AffineParams {
    double theta_deg = 0.0;
    double p = 1.0;
    double q = 1.0;
    PixelPoint center;

    friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

/// Throws InvalidArgument unless p > 0, q > 0 and both are finite.
void validate_scale(const AffineParams& params);

Raster to_grayscale(const Raster& img);

/// Normalized 1-D Gaussian of radius ceil(3 * sigma); weights sum to 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication. Intermediate values stay in
/// double precision; the result is rounded once to the nearest integer.
Raster gaussian_blur(const Raster& img, double sigma);

enum class Polarity {
    DefectDark,    ///< bit = 1 where pixel < threshold
    DefectBright,  ///< bit = 1 where pixel > threshold
};

Mask binarize(const Raster& img, int threshold, Polarity polarity = Polarity::DefectDark);

/// Threshold t maximizing the between-class variance of the split
/// {v <= t} | {v > t}. binarize(img, t, DefectBright) yields the upper class;
/// the lower class is binarize(img, t + 1, DefectDark).
int otsu_threshold(const Raster& img);

/// Output of an affine warp, with the patch center in the output frame.
struct WarpResult {
    Raster image;
    Mask mask;
};

/// Width and height of the bounding box of the transformed patch.
PixelPoint warped_extent(int width, int height, const AffineParams& params);

/// Warps raster and mask by the same scale-then-rotate map (inverse mapping;
/// bilinear for the raster, nearest-neighbor for the mask). Samples that fall
/// outside the source yield 0 in both outputs. Throws when the output
/// bounding box has zero area. `params.center` is ignored.
WarpResult warp(const Raster& img, const Mask& mask, const AffineParams& params);

/// Bilinear resize to an explicit size.
Raster resize_bilinear(const Raster& img, int width, int height);

/// Area-averaging resize; every output pixel is the coverage-weighted mean of
/// the source pixels under it. Doubles are returned unrounded, per channel.
std::vector<double> resize_area(const Raster& img, int width, int height);

Raster resize_area_rounded(const Raster& img, int width, int height);

/// Augmentation operations. All are geometric: output values are drawn
/// from the input by resampling, never remapped.
namespace augment_ops {
/// Crop a window and resize it back to the full input size.
struct Clip {
    int x = 0, y = 0, width = 0, height = 0;
};
/// Extract a window; output has the window's size.
struct Crop {
    int x = 0, y = 0, width = 0, height = 0;
};
/// Resize the whole image by `factor` (output size scales).
struct Zoom {
    double factor = 1.0;
};
/// Integer shift on a fixed canvas; vacated pixels replicate the edge.
struct Translate {
    int dx = 0, dy = 0;
};
/// Counterclockwise rotation about the image center on a fixed canvas;
/// samples outside the source replicate the edge.
struct Rotate {
    double degrees = 0.0;
};
}  // namespace augment_ops

using AugmentOp = std::variant<augment_ops::Clip, augment_ops::Crop, augment_ops::Zoom,
                               augment_ops::Translate, augment_ops::Rotate>;

Raster augment(const Raster& img, const AugmentOp& op);

std::string describe(const AugmentOp& op);

}  // namespace hybridaug
