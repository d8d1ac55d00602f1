// Compiled with -mavx2 only (no FMA): products and sums are rounded separately
// so the order-preserving kernels match the scalar reference bit-for-bit.
#include "hybridaug/kernels/kernels.hpp"

#include <immintrin.h>

namespace hybridaug::kernels {
namespace {

void convolve_row(const double* padded, std::size_t width, const double* weights,
                  std::size_t taps, double* out) {
    std::size_t x = 0;
    for (; x + 4 <= width; x += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = 0; k < taps; ++k) {
            const __m256d w = _mm256_broadcast_sd(weights + k);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_loadu_pd(padded + x + k)));
        }
        _mm256_storeu_pd(out + x, acc);
    }
    for (; x < width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * padded[x + k];
        out[x] = acc;
    }
}

void convolve_columns(const double* const* rows, std::size_t width, const double* weights,
                      std::size_t taps, double* out) {
    std::size_t x = 0;
    for (; x + 4 <= width; x += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = 0; k < taps; ++k) {
            const __m256d w = _mm256_broadcast_sd(weights + k);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_loadu_pd(rows[k] + x)));
        }
        _mm256_storeu_pd(out + x, acc);
    }
    for (; x < width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * rows[k][x];
        out[x] = acc;
    }
}

void squared_distances_from(const double* features, std::size_t n, std::size_t dim,
                            std::size_t i, double* out) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = 0; k < dim; ++k) {
            const __m256d xi = _mm256_broadcast_sd(features + k * n + i);
            const __m256d diff = _mm256_sub_pd(xi, _mm256_loadu_pd(features + k * n + j));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
        }
        _mm256_storeu_pd(out + j, acc);
    }
    for (; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double diff = features[k * n + i] - features[k * n + j];
            acc = acc + diff * diff;
        }
        out[j] = acc;
    }
}

void student_t_row(const double* xs, const double* ys, std::size_t n, std::size_t i,
                   double* out) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d xi = _mm256_set1_pd(xs[i]);
    const __m256d yi = _mm256_set1_pd(ys[i]);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d dx = _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j));
        const __m256d dy = _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j));
        const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
        _mm256_storeu_pd(out + j, _mm256_div_pd(one, _mm256_add_pd(one, d2)));
    }
    for (; j < n; ++j) {
        const double dx = xs[i] - xs[j];
        const double dy = ys[i] - ys[j];
        out[j] = 1.0 / (1.0 + (dx * dx + dy * dy));
    }
    out[i] = 0.0;
}

double horizontal_sum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

Vec2 kl_gradient_row(const double* p_row, double p_scale, const double* kernel_row,
                     double inv_z, const double* xs, const double* ys, std::size_t n,
                     std::size_t i) {
    const __m256d scale = _mm256_set1_pd(p_scale);
    const __m256d iz = _mm256_set1_pd(inv_z);
    const __m256d xi = _mm256_set1_pd(xs[i]);
    const __m256d yi = _mm256_set1_pd(ys[i]);
    __m256d gx = _mm256_setzero_pd();
    __m256d gy = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d w = _mm256_loadu_pd(kernel_row + j);
        const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(p_row + j), scale);
        const __m256d force = _mm256_mul_pd(_mm256_sub_pd(p, _mm256_mul_pd(w, iz)), w);
        gx = _mm256_add_pd(gx, _mm256_mul_pd(force, _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j))));
        gy = _mm256_add_pd(gy, _mm256_mul_pd(force, _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j))));
    }
    double sx = horizontal_sum(gx);
    double sy = horizontal_sum(gy);
    for (; j < n; ++j) {
        const double w = kernel_row[j];
        const double force = (p_row[j] * p_scale - w * inv_z) * w;
        sx = sx + force * (xs[i] - xs[j]);
        sy = sy + force * (ys[i] - ys[j]);
    }
    return {4.0 * sx, 4.0 * sy};
}

void select_u8(const std::uint8_t* mask, const std::uint8_t* fg, const std::uint8_t* bg,
               std::uint8_t* out, std::size_t count) {
    const __m256i zero = _mm256_setzero_si256();
    std::size_t k = 0;
    for (; k + 32 <= count; k += 32) {
        const __m256i m = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(mask + k));
        // 0xFF where mask != 0
        const __m256i sel = _mm256_xor_si256(_mm256_cmpeq_epi8(m, zero), _mm256_set1_epi8(-1));
        const __m256i f = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(fg + k));
        const __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bg + k));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + k), _mm256_blendv_epi8(b, f, sel));
    }
    for (; k < count; ++k) out[k] = mask[k] ? fg[k] : bg[k];
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{
        "avx2",        convolve_row,    convolve_columns, squared_distances_from,
        student_t_row, kl_gradient_row, select_u8,
    };
    return table;
}

}  // namespace hybridaug::kernels
