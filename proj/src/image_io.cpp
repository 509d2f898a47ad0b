#include "asymgan/image_io.hpp"

#include <png.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "asymgan/common.hpp"

namespace asymgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::vector<std::uint8_t> to_rgb8(const torch::Tensor& chw) {
  TORCH_CHECK(chw.dim() == 3 && chw.size(0) == 3, "expected 3xHxW image");
  auto img = chw.to(torch::kF32).contiguous();
  const std::int64_t h = img.size(1), w = img.size(2);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(3 * h * w));
  auto acc = img.accessor<float, 3>();
  std::size_t i = 0;
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) {
        float v = (acc[c][y][x] + 1.0f) * 127.5f;
        v = std::min(255.0f, std::max(0.0f, std::round(v)));
        out[i++] = static_cast<std::uint8_t>(v);
      }
    }
  }
  return out;
}

torch::Tensor from_rgb8(const std::vector<std::uint8_t>& rgb, std::int64_t h,
                        std::int64_t w) {
  TORCH_CHECK(static_cast<std::int64_t>(rgb.size()) == 3 * h * w,
              "rgb byte count mismatch");
  auto t = torch::empty({3, h, w}, torch::kF32);
  auto acc = t.accessor<float, 3>();
  std::size_t i = 0;
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) {
        acc[c][y][x] = static_cast<float>(rgb[i++]) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

void save_png(const torch::Tensor& chw, const std::filesystem::path& path) {
  auto rgb = to_rgb8(chw);
  const auto h = static_cast<png_uint_32>(chw.size(1));
  const auto w = static_cast<png_uint_32>(chw.size(2));

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw io_error("cannot open for writing: " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("png write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + 3 * w * y;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

torch::Tensor load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw io_error("cannot open for reading: " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("png read failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);

  // Normalize whatever we were handed to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  TORCH_CHECK(png_get_rowbytes(png, info) == 3 * w, "unexpected png row size");

  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(3) * w * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + 3 * w * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return from_rgb8(rgb, h, w);
}

std::size_t compressed_size(const std::vector<std::uint8_t>& bytes) {
  uLongf bound = compressBound(static_cast<uLong>(bytes.size()));
  std::vector<std::uint8_t> out(bound);
  uLongf out_len = bound;
  int rc = compress2(out.data(), &out_len, bytes.data(),
                     static_cast<uLong>(bytes.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw io_error("zlib compress failed");
  return static_cast<std::size_t>(out_len);
}

torch::Tensor make_grid(const std::vector<torch::Tensor>& images,
                        std::int64_t columns, std::int64_t padding) {
  TORCH_CHECK(!images.empty(), "make_grid: no images");
  const std::int64_t h = images[0].size(1), w = images[0].size(2);
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  const std::int64_t cols = std::min<std::int64_t>(columns, n);
  const std::int64_t rows = (n + cols - 1) / cols;
  auto grid = torch::full({3, rows * (h + padding) + padding,
                           cols * (w + padding) + padding},
                          1.0, torch::kF32);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t r = i / cols, c = i % cols;
    grid.slice(1, padding + r * (h + padding), padding + r * (h + padding) + h)
        .slice(2, padding + c * (w + padding), padding + c * (w + padding) + w)
        .copy_(images[static_cast<std::size_t>(i)].to(torch::kF32));
  }
  return grid;
}

}  // namespace asymgan
