#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace hybridaug::kernels {

/// Result of a 2-D gradient-row reduction.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Function table for the data-parallel inner loops. Every variant must
/// produce bit-identical results to the scalar reference except for the
/// reductions marked "reassociating", which agree to rounding.
struct KernelTable {
    std::string_view name;

    /// out[x] = sum_k weights[k] * padded[x + k], for x in [0, width).
    /// `padded` holds width + taps - 1 samples. Taps are summed in order.
    void (*convolve_row)(const double* padded, std::size_t width, const double* weights,
                         std::size_t taps, double* out);

    /// out[x] = sum_k weights[k] * rows[k][x]. Taps are summed in order.
    void (*convolve_columns)(const double* const* rows, std::size_t width,
                             const double* weights, std::size_t taps, double* out);

    /// Squared Euclidean distance from point i to every point j.
    /// `features` is dimension-major: features[k * n + j] is coordinate k of
    /// point j. Coordinates are accumulated in order k = 0..dim-1.
    void (*squared_distances_from)(const double* features, std::size_t n, std::size_t dim,
                                   std::size_t i, double* out);

    /// out[j] = 1 / (1 + |y_i - y_j|^2) with out[i] = 0.
    void (*student_t_row)(const double* xs, const double* ys, std::size_t n, std::size_t i,
                          double* out);

    /// 4 * sum_j (p_row[j] * p_scale - kernel_row[j] * inv_z) * kernel_row[j] * (y_i - y_j).
    /// Reassociating.
    Vec2 (*kl_gradient_row)(const double* p_row, double p_scale, const double* kernel_row,
                            double inv_z, const double* xs, const double* ys, std::size_t n,
                            std::size_t i);

    /// out[k] = mask[k] ? fg[k] : bg[k].
    void (*select_u8)(const std::uint8_t* mask, const std::uint8_t* fg, const std::uint8_t* bg,
                      std::uint8_t* out, std::size_t count);
};

/// Portable reference implementation.
const KernelTable& scalar_kernels();

/// AVX2 variant, or nullptr when it was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the library. Chosen once: AVX2 when available, unless the
/// environment variable HYBRIDAUG_SIMD is set to "scalar".
const KernelTable& active_kernels();

}  // namespace hybridaug::kernels
