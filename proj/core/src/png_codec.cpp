#include "png_codec.hpp"

#include <csetjmp>
#include <cstring>
#include <string>

#include <png.h>

#include "trajwarp/errors.hpp"

namespace trajwarp::png {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void WriteToVector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void FlushNothing(png_structp) {}

// Last libpng error text for this thread; read after longjmp lands.
thread_local char g_error_text[256];

[[noreturn]] void OnError(png_structp png, png_const_charp msg) {
  std::strncpy(g_error_text, msg ? msg : "unknown libpng error", sizeof(g_error_text) - 1);
  g_error_text[sizeof(g_error_text) - 1] = '\0';
  png_longjmp(png, 1);
}

void OnWarning(png_structp, png_const_charp) {}

void ReadFromSpan(png_structp png, png_bytep data, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(data, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

std::size_t RowBytes(const Image& image) {
  switch (image.layout) {
    case Layout::kRgb8: return static_cast<std::size_t>(image.width) * 3;
    case Layout::kGray8:
    case Layout::kGray1: return static_cast<std::size_t>(image.width);
    case Layout::kGray16: return static_cast<std::size_t>(image.width) * 2;
  }
  return 0;
}

}  // namespace

std::vector<std::uint8_t> Encode(const Image& image) {
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("PNG encode: empty image");
  const std::size_t row_bytes = RowBytes(image);
  if (image.pixels.size() != row_bytes * static_cast<std::size_t>(image.height)) {
    throw InvalidArgument("PNG encode: pixel buffer size mismatch");
  }

  // Rows in libpng's packed form; all allocation happens before setjmp.
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(image.height));
  int bit_depth = 8;
  int color_type = PNG_COLOR_TYPE_RGB;
  for (int y = 0; y < image.height; ++y) {
    const std::uint8_t* src = image.pixels.data() + row_bytes * static_cast<std::size_t>(y);
    auto& row = rows[static_cast<std::size_t>(y)];
    switch (image.layout) {
      case Layout::kRgb8:
      case Layout::kGray8:
        row.assign(src, src + row_bytes);
        break;
      case Layout::kGray1:
        row.assign((static_cast<std::size_t>(image.width) + 7) / 8, 0);
        for (int x = 0; x < image.width; ++x) {
          if (src[x]) row[static_cast<std::size_t>(x) / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
        }
        break;
      case Layout::kGray16:
        row.resize(row_bytes);
        for (int x = 0; x < image.width; ++x) {
          std::uint16_t v;
          std::memcpy(&v, src + 2 * x, 2);
          row[2 * static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(v >> 8);
          row[2 * static_cast<std::size_t>(x) + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        break;
    }
  }
  switch (image.layout) {
    case Layout::kRgb8: break;
    case Layout::kGray8: color_type = PNG_COLOR_TYPE_GRAY; break;
    case Layout::kGray1: color_type = PNG_COLOR_TYPE_GRAY; bit_depth = 1; break;
    case Layout::kGray16: color_type = PNG_COLOR_TYPE_GRAY; bit_depth = 16; break;
  }
  std::vector<png_bytep> row_ptrs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) row_ptrs[i] = rows[i].data();

  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, OnError, OnWarning);
  if (!png) throw Error("PNG encode: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("PNG encode: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(std::string("PNG encode failed: ") + g_error_text);
  }
  png_set_write_fn(png, &out, WriteToVector, FlushNothing);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image Decode(std::span<const std::uint8_t> bytes, Layout want) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("png.signature", "not a PNG file", 0);
  }
  ReadCursor cursor{bytes, 0};
  Image image;
  image.layout = want;
  std::vector<png_bytep> row_ptrs;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, OnError, OnWarning);
  if (!png) throw Error("PNG decode: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("PNG decode: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png", g_error_text, static_cast<std::int64_t>(cursor.offset));
  }
  png_set_read_fn(png, &cursor, ReadFromSpan);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  switch (want) {
    case Layout::kRgb8:
      if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
      if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
      if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      if (bit_depth == 16) png_set_strip_16(png);
      if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
      png_set_tRNS_to_alpha(png);
      png_set_strip_alpha(png);
      break;
    case Layout::kGray1:
    case Layout::kGray8:
      if (color_type != PNG_COLOR_TYPE_GRAY) {
        png_error(png, "expected a grayscale PNG");
      }
      if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      if (bit_depth == 16) png_set_strip_16(png);
      break;
    case Layout::kGray16:
      if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
        png_error(png, "expected a 16-bit grayscale PNG");
      }
      break;
  }
  png_read_update_info(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  image.width = static_cast<int>(width);
  image.height = static_cast<int>(height);
  image.pixels.resize(row_bytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = image.pixels.data() + row_bytes * y;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (want == Layout::kGray16) {
    for (std::size_t i = 0; i + 1 < image.pixels.size(); i += 2) {
      const std::uint16_t v = static_cast<std::uint16_t>((image.pixels[i] << 8) | image.pixels[i + 1]);
      std::memcpy(&image.pixels[i], &v, 2);
    }
  } else if (want == Layout::kGray1) {
    for (auto& p : image.pixels) p = p ? 1 : 0;
  }
  return image;
}

}  // namespace trajwarp::png
