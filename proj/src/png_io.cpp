#include "hybridaug/png_io.hpp"

#include "hybridaug/error.hpp"

#include <png.h>

#include <fstream>
#include <iterator>

namespace hybridaug {
namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace

Raster decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw IoError(std::string("PNG decode failed: ") + image.message);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw IoError("PNG decode failed: " + message);
    }
    return Raster(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(pixels));
}

Raster read_png(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = slurp(path);
    try {
        return decode_png(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Raster& img) {
    if (img.empty()) throw InvalidArgument("cannot encode an empty raster");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, img.pixels().data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> bytes(size);
    if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, img.pixels().data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + image.message);
    bytes.resize(size);
    return bytes;
}

void write_png(const std::filesystem::path& path, const Raster& img) {
    spit(path, encode_png(img));
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    std::vector<std::uint8_t> pixels(mask.bits().begin(), mask.bits().end());
    for (auto& v : pixels) v = v ? 255 : 0;
    write_png(path, Raster(mask.width(), mask.height(), 1, std::move(pixels)));
}

Mask read_mask_png(const std::filesystem::path& path) {
    Raster img = read_png(path);
    if (img.channels() != 1) img = to_grayscale(img);
    std::vector<std::uint8_t> bits(img.pixels().begin(), img.pixels().end());
    for (auto& v : bits) v = v ? 1 : 0;
    return Mask(img.width(), img.height(), std::move(bits));
}

}  // namespace hybridaug
