#include "cesynth/png_writer.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace cesynth {

void write_png(const std::filesystem::path& path, const Volume& image) {
  if (image.rank() != 2 || image.empty()) throw UsageError("write_png: expected a 2-D image, got " + shape_str(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1);
  const auto [lo_it, hi_it] = std::minmax_element(image.values().begin(), image.values().end());
  const double lo = *lo_it, range = static_cast<double>(*hi_it) - lo;
  std::vector<png_byte> pixels(h * w);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double t = range > 0.0 ? (image[i] - lo) / range : 0.0;
    pixels[i] = static_cast<png_byte>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  }

  auto tmp = path;
  tmp += ".tmp";
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(tmp.c_str(), "wb"), &std::fclose);
  if (!fp) throw DataError("cannot open '" + tmp.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) png_write_row(png, pixels.data() + y * w);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace cesynth
