#include "confix/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "confix/error.hpp"

namespace confix {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed for " + path.string());
  }
  std::vector<std::uint8_t> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), to_u8);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * img.width() * img.channels();
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8,
               img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image " + path.string());
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, 8, fp.get()) != 8 || png_sig_cmp(sig.data(), 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed for " + path.string());
  }
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = png_get_channels(png, info);
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel layout in " + path.string());
  }
  bytes.resize(static_cast<std::size_t>(w) * h * ch);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageBuffer img(w, h, ch);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i] / 255.0;
  return img;
}

void write_pgm16(const ImageBuffer& img, double scale, const std::filesystem::path& path) {
  if (img.channels() != 1) throw ContractError("write_pgm16: single-channel image required");
  if (!(scale > 0.0)) scale = 1.0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  char scale_text[64];
  std::snprintf(scale_text, sizeof(scale_text), "%.17g", scale);
  out << "P5\n# scale " << scale_text << "\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<unsigned char> body(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.data()[i] / scale, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    body[2 * i] = static_cast<unsigned char>(q >> 8);
    body[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ImageBuffer read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  double scale = 1.0;
  std::vector<long> header;
  std::string tok;
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError("not a binary PGM: " + path.string());
  while (header.size() < 3 && in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      std::istringstream rs(rest);
      std::string key;
      if (rs >> key && key == "scale") rs >> scale;
      continue;
    }
    header.push_back(std::stol(tok));
  }
  if (header.size() != 3 || header[2] != 65535) throw IoError("unsupported PGM header in " + path.string());
  in.get();
  ImageBuffer img(static_cast<int>(header[0]), static_cast<int>(header[1]), 1);
  std::vector<unsigned char> body(img.size() * 2);
  if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()))) {
    throw IoError("truncated PGM " + path.string());
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned q = (static_cast<unsigned>(body[2 * i]) << 8) | body[2 * i + 1];
    img.data()[i] = q / 65535.0 * scale;
  }
  return img;
}

void write_cfxf(const ImageBuffer& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.width()),
                                 static_cast<std::uint32_t>(img.height()),
                                 static_cast<std::uint32_t>(img.channels())};
  out.write("CFXF", 4);
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> body(img.data().begin(), img.data().end());
  out.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

ImageBuffer read_cfxf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t dims[3];
  if (!in.read(magic, 4) || std::memcmp(magic, "CFXF", 4) != 0 ||
      !in.read(reinterpret_cast<char*>(dims), sizeof(dims))) {
    throw IoError("bad CFXF header in " + path.string());
  }
  ImageBuffer img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  std::vector<float> body(img.size());
  if (!in.read(reinterpret_cast<char*>(body.data()),
               static_cast<std::streamsize>(body.size() * sizeof(float)))) {
    throw IoError("truncated CFXF body in " + path.string());
  }
  std::copy(body.begin(), body.end(), img.data().begin());
  return img;
}

}  // namespace confix
