#include "tabletrec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "tabletrec/errors.hpp"

namespace tabletrec {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_u8(double v) {
  return uint8_t(std::clamp(std::lround(std::clamp(v, 0.0, 1.0) * 255.0), 0l, 255l));
}

}  // namespace

void write_png(const std::string& path, const Image& color, const GridF& alpha) {
  const bool has_alpha = !alpha.empty();
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw LoadError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("libpng failure writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, color.width, color.height, 8,
               has_alpha ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int stride = has_alpha ? 4 : 3;
  std::vector<uint8_t> row(size_t(color.width) * stride);
  for (int y = 0; y < color.height; ++y) {
    for (int x = 0; x < color.width; ++x) {
      const Vec3& c = color.at(y, x);
      row[x * stride + 0] = to_u8(c.x);
      row[x * stride + 1] = to_u8(c.y);
      row[x * stride + 2] = to_u8(c.z);
      if (has_alpha) row[x * stride + 3] = to_u8(alpha.at(y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png16(const std::string& path, const Grid<uint16_t>& gray) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw LoadError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("libpng failure writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, gray.width, gray.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(gray.width) * 2);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      row[x * 2] = uint8_t(gray.at(y, x) >> 8);  // network byte order
      row[x * 2 + 1] = uint8_t(gray.at(y, x) & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

PngData read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw LoadError("cannot open: " + path);
  uint8_t header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw LoadError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("libpng failure reading " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  PngData out;
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);

  // Normalize exotic layouts: palettes to RGB, sub-byte grays to 8 bits.
  png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<uint8_t> raw(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = raw.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  out.samples.resize(size_t(out.width) * out.height * out.channels);
  if (out.bit_depth == 16) {
    for (size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] = uint16_t(raw[2 * i] << 8 | raw[2 * i + 1]);
  } else {
    for (size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = raw[i];
  }
  return out;
}

Image read_png_rgb(const std::string& path) {
  const PngData png = read_png(path);
  Image out(png.height, png.width);
  const double scale = png.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x) {
      const size_t base = (size_t(y) * png.width + x) * png.channels;
      Vec3 c;
      if (png.channels >= 3)
        c = {png.samples[base] * scale, png.samples[base + 1] * scale,
             png.samples[base + 2] * scale};
      else
        c = Vec3{1, 1, 1} * (png.samples[base] * scale);
      out.at(y, x) = c;
    }
  return out;
}

namespace {

void write_pfm_impl(const std::string& path, int width, int height, int channels,
                    const float* data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open for writing: " + path);
  f << (channels == 3 ? "PF" : "Pf") << "\n" << width << " " << height << "\n-1.0\n";
  // PFM stores rows bottom-up.
  for (int y = height - 1; y >= 0; --y)
    f.write(reinterpret_cast<const char*>(data + size_t(y) * width * channels),
            std::streamsize(sizeof(float)) * width * channels);
  if (!f) throw LoadError("short write: " + path);
}

}  // namespace

void write_pfm(const std::string& path, const GridF& gray) {
  std::vector<float> data(gray.data.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = float(gray.data[i]);
  write_pfm_impl(path, gray.width, gray.height, 1, data.data());
}

void write_pfm(const std::string& path, const Image& rgb) {
  std::vector<float> data(rgb.data.size() * 3);
  for (size_t i = 0; i < rgb.data.size(); ++i) {
    data[3 * i] = float(rgb.data[i].x);
    data[3 * i + 1] = float(rgb.data[i].y);
    data[3 * i + 2] = float(rgb.data[i].z);
  }
  write_pfm_impl(path, rgb.width, rgb.height, 3, data.data());
}

bool read_pfm(const std::string& path, GridF& gray, Image& rgb, bool& is_color) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::string magic;
  int width, height;
  double scale;
  f >> magic >> width >> height >> scale;
  if (magic != "PF" && magic != "Pf") throw LoadError("not a PFM file: " + path);
  f.get();  // single whitespace after the header
  is_color = magic == "PF";
  const int channels = is_color ? 3 : 1;
  std::vector<float> data(size_t(width) * height * channels);
  f.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
  if (!f) throw LoadError("truncated PFM: " + path);
  const bool flip_endian = scale > 0;  // positive scale marks big-endian
  if (flip_endian)
    for (float& v : data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  if (is_color) {
    rgb = Image(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const size_t s = (size_t(height - 1 - y) * width + x) * 3;
        rgb.at(y, x) = {data[s], data[s + 1], data[s + 2]};
      }
  } else {
    gray = GridF(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) gray.at(y, x) = data[size_t(height - 1 - y) * width + x];
  }
  return true;
}

}  // namespace tabletrec
