#include "painscope/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "painscope/errors.hpp"

namespace painscope {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) {
        return false;
    }
    return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                      [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

Image8 read_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw IoError("cannot open image: " + path);
    }
    png_byte header[8];
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw FormatError(path, "not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    Image8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path, "corrupt PNG data");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) {
        png_set_strip_16(png);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

int next_pnm_int(std::istream& in, const std::string& path) {
    int c = in.peek();
    while (c != EOF) {
        if (std::isspace(c)) {
            in.get();
        } else if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else {
            break;
        }
        c = in.peek();
    }
    int v = 0;
    if (!(in >> v)) {
        throw FormatError(path, "malformed PNM header");
    }
    return v;
}

Image8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open image: " + path);
    }
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    const bool binary = magic == "P5" || magic == "P6";
    const bool ascii = magic == "P2" || magic == "P3";
    if (!binary && !ascii) {
        throw FormatError(path, "unsupported PNM magic '" + magic + "'");
    }
    Image8 img;
    img.channels = (magic == "P6" || magic == "P3") ? 3 : 1;
    img.width = next_pnm_int(in, path);
    img.height = next_pnm_int(in, path);
    const int maxval = next_pnm_int(in, path);
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
        throw FormatError(path, "unsupported PNM dimensions or depth");
    }
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(n);
    if (binary) {
        in.get();
        in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError(path, "truncated PNM raster");
        }
    } else {
        for (auto& p : img.pixels) {
            p = static_cast<std::uint8_t>(next_pnm_int(in, path));
        }
    }
    if (maxval != 255) {
        for (auto& p : img.pixels) {
            p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
        }
    }
    return img;
}

} // namespace

Image8 read_image(const std::string& path) {
    if (has_suffix(path, ".png")) {
        return read_png(path);
    }
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm")) {
        return read_pnm(path);
    }
    throw FormatError(path, "unsupported image extension");
}

void write_png(const Image8& image, const std::string& path) {
    if (image.channels != 1 && image.channels != 3) {
        throw ContractError("write_png supports 1 or 3 channels");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw IoError("cannot write image: " + path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG: " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pnm(const Image8& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write image: " + path);
    }
    out << (image.channels == 3 ? "P6" : "P5") << '\n'
        << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
}

std::vector<double> resize_plane(const std::vector<double>& plane, int height, int width,
                                 int out_height, int out_width) {
    std::vector<double> out(static_cast<std::size_t>(out_height) * out_width);
    const double sy = static_cast<double>(height) / out_height;
    const double sx = static_cast<double>(width) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, width - 1);
            const double wx = fx - x0;
            auto at = [&](int yy, int xx) { return plane[static_cast<std::size_t>(yy) * width + xx]; };
            const double top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
            const double bottom = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
            out[static_cast<std::size_t>(y) * out_width + x] = top * (1.0 - wy) + bottom * wy;
        }
    }
    return out;
}

Tensor resize_image(const Tensor& image, int out_size) {
    const auto C = image.dim(0);
    const int H = static_cast<int>(image.dim(1)), W = static_cast<int>(image.dim(2));
    if (H == out_size && W == out_size) {
        return image;
    }
    const auto plane = static_cast<std::size_t>(H) * W;
    const auto out_plane = static_cast<std::size_t>(out_size) * out_size;
    Tensor out(Shape{C, static_cast<std::size_t>(out_size), static_cast<std::size_t>(out_size)});
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<double> src(image.values().begin() + static_cast<long>(c * plane),
                                image.values().begin() + static_cast<long>((c + 1) * plane));
        const auto dst = resize_plane(src, H, W, out_size, out_size);
        std::copy(dst.begin(), dst.end(), out.values().begin() + static_cast<long>(c * out_plane));
    }
    return out;
}

Tensor to_tensor(const Image8& image, int channels, int size) {
    const auto W = static_cast<std::size_t>(image.width);
    const auto H = static_cast<std::size_t>(image.height);
    const auto C = static_cast<std::size_t>(channels);
    Tensor planar(Shape{C, H, W});
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const std::uint8_t* px = image.pixels.data() + (y * W + x) * image.channels;
            if (channels == image.channels) {
                for (std::size_t c = 0; c < C; ++c) {
                    planar.at(c, y, x) = px[c] / 255.0;
                }
            } else if (channels == 1) {
                double total = 0.0;
                for (int c = 0; c < image.channels; ++c) {
                    total += px[c];
                }
                planar.at(0, y, x) = total / (255.0 * image.channels);
            } else {
                for (std::size_t c = 0; c < C; ++c) {
                    planar.at(c, y, x) = px[0] / 255.0;
                }
            }
        }
    }
    Tensor out = resize_image(planar, size);
    for (double& v : out.values()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Image8 from_tensor(const Tensor& image) {
    Image8 img;
    img.channels = static_cast<int>(image.dim(0));
    img.height = static_cast<int>(image.dim(1));
    img.width = static_cast<int>(image.dim(2));
    img.pixels.resize(image.size());
    for (std::size_t c = 0; c < image.dim(0); ++c) {
        for (std::size_t y = 0; y < image.dim(1); ++y) {
            for (std::size_t x = 0; x < image.dim(2); ++x) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                img.pixels[(y * image.dim(2) + x) * image.dim(0) + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return img;
}

} // namespace painscope
