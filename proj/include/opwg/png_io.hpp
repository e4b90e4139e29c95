#pragma once

// PNG support through libpng; link against PNG::PNG when including this.

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "opwg/error.hpp"
#include "opwg/image.hpp"

namespace opwg {

inline ImagePlane read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw Error("cannot read PNG '" + path + "': " + image.message);
    image.format = PNG_FORMAT_RGB;
    ImagePlane img(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, img.rgb.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error("cannot decode PNG '" + path + "': " + msg);
    }
    return img;
}

inline void write_png(const std::string& path, const ImagePlane& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0, nullptr))
        throw Error("cannot write PNG '" + path + "': " + image.message);
}

inline bool has_extension(const std::string& path, const std::string& ext) {
    if (path.size() < ext.size()) return false;
    std::string tail = path.substr(path.size() - ext.size());
    for (auto& c : tail) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return tail == ext;
}

// Picks the decoder from the file's magic bytes.
inline ImagePlane read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
    return read_png(path);
}

// PNG unless the path ends in .ppm.
inline void write_image(const std::string& path, const ImagePlane& img) {
    if (has_extension(path, ".ppm"))
        write_ppm(path, img);
    else
        write_png(path, img);
}

}  // namespace opwg
