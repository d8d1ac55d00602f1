#include "hybridaug/kernels/kernels.hpp"

namespace hybridaug::kernels {
namespace {

void convolve_row(const double* padded, std::size_t width, const double* weights,
                  std::size_t taps, double* out) {
    for (std::size_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * padded[x + k];
        out[x] = acc;
    }
}

void convolve_columns(const double* const* rows, std::size_t width, const double* weights,
                      std::size_t taps, double* out) {
    for (std::size_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) acc = acc + weights[k] * rows[k][x];
        out[x] = acc;
    }
}

void squared_distances_from(const double* features, std::size_t n, std::size_t dim,
                            std::size_t i, double* out) {
    for (std::size_t j = 0; j < n; ++j) {
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
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = xs[i] - xs[j];
        const double dy = ys[i] - ys[j];
        out[j] = 1.0 / (1.0 + (dx * dx + dy * dy));
    }
    out[i] = 0.0;
}

Vec2 kl_gradient_row(const double* p_row, double p_scale, const double* kernel_row,
                     double inv_z, const double* xs, const double* ys, std::size_t n,
                     std::size_t i) {
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double w = kernel_row[j];
        const double force = (p_row[j] * p_scale - w * inv_z) * w;
        gx = gx + force * (xs[i] - xs[j]);
        gy = gy + force * (ys[i] - ys[j]);
    }
    return {4.0 * gx, 4.0 * gy};
}

void select_u8(const std::uint8_t* mask, const std::uint8_t* fg, const std::uint8_t* bg,
               std::uint8_t* out, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) out[k] = mask[k] ? fg[k] : bg[k];
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",         convolve_row,    convolve_columns, squared_distances_from,
        student_t_row,    kl_gradient_row, select_u8,
    };
    return table;
}

}  // namespace hybridaug::kernels
