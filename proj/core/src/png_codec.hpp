#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace trajwarp::png {

enum class Layout { kRgb8, kGray8, kGray1, kGray16 };

struct Image {
  int width = 0;
  int height = 0;
  Layout layout = Layout::kRgb8;
  /// kRgb8: 3 bytes/pixel; kGray8 / kGray1: 1 byte/pixel (0 or 1 for kGray1);
  /// kGray16: host-order uint16 stored as 2 bytes/pixel.
  std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> Encode(const Image& image);

/// Decodes into `want`: kRgb8 converts any 8/16-bit gray/rgb(a)/palette input,
/// kGray1 thresholds to 0/1, kGray16 requires a 16-bit grayscale file.
Image Decode(std::span<const std::uint8_t> bytes, Layout want);

}  // namespace trajwarp::png
