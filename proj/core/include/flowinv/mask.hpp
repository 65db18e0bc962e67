// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowinv/tensor.hpp"

namespace flowinv {

enum class EditType { Local, Background, Global, Other };

const char* to_string(EditType type);
/// Case-insensitive "local" / "background" / "global" / "other".
EditType parse_edit_type(const std::string& text);

/// Integer grid coordinate: x is the column, y the row.
struct GridPoint {
  long x = 0;
  long y = 0;
};

/// Axis-aligned box spanned by two diagonal corners, inclusive of both:
/// it covers columns x1..x2 and rows y1..y2.
struct BBox {
  long x1 = 0;
  long y1 = 0;
  long x2 = 0;
  long y2 = 0;

  /// Orders the corners so x1 <= x2 and y1 <= y2.
  static BBox from_corners(GridPoint p, GridPoint q);

  /// Zero geometric area: the corners share a row or a column.
  bool degenerate() const { return x1 == x2 || y1 == y2; }
  /// Intersection with an h x w grid; nullopt when they do not overlap.
  std::optional<BBox> clamped(std::size_t height, std::size_t width) const;
  bool contains(std::size_t row, std::size_t col) const;
};

/// H x W mask, row-major. Hard masks hold exactly 0 or 1; soft masks hold
/// values in [0, 1].
class EditMask {
 public:
  EditMask(std::size_t height, std::size_t width, double fill = 0.0, bool soft = false);
  EditMask(std::size_t height, std::size_t width, std::vector<double> values, bool soft = false);

  static EditMask ones(std::size_t height, std::size_t width) { return EditMask(height, width, 1.0); }
  static EditMask zeros(std::size_t height, std::size_t width) { return EditMask(height, width, 0.0); }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool soft() const { return soft_; }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  void set(std::size_t row, std::size_t col, double value);
  const std::vector<double>& values() const { return values_; }
  /// Number of non-zero entries.
  std::size_t support_size() const;

  friend bool operator==(const EditMask&, const EditMask&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  bool soft_;
  std::vector<double> values_;
};

/// 1 - m element-wise.
EditMask complement(const EditMask& m);

/// Segmentation oracle S: binary mask of the object inside the box on an
/// h x w grid.
using Segmenter = std::function<EditMask(const BBox& box, std::size_t height, std::size_t width)>;

/// Four-way mask by edit type:
///   Local      -> dilate(S(B), k)
///   Background -> 1 - dilate(S(B), k)
///   Global     -> all ones (segmenter not called, box ignored)
///   Other      -> indicator of B
/// Dilation applies to the segmentation before complementing, so Background
/// is always the exact complement of Local. k = 1 disables it. Throws
/// ConfigError for a degenerate box or one that misses the grid.
EditMask build_mask(EditType type, const BBox& box, const Segmenter& segmenter, std::size_t height,
                    std::size_t width, std::size_t dilation_kernel = 5);

/// Filled indicator of the (clamped) box.
EditMask box_indicator(const BBox& box, std::size_t height, std::size_t width);

/// 1 inside the box where reference channel `channel` exceeds tau, 0 elsewhere.
EditMask threshold_segment(const Latent& reference, const BBox& box, double tau, std::size_t channel = 0);

/// Segmenter backed by threshold_segment on a fixed reference latent.
Segmenter threshold_segmenter(Latent reference, double tau, std::size_t channel = 0);

/// Binary dilation by a k x k square (max filter for soft masks), clamped at
/// the borders. k must be odd.
EditMask dilate_mask(const EditMask& m, std::size_t k);

/// Mask files: plain PGM ("P2", maxval 1) for *.pgm, otherwise CSV of 0/1
/// with one row per line. `expected` (height, width) is checked when given.
EditMask load_mask(const std::filesystem::path& path,
                   std::optional<std::pair<std::size_t, std::size_t>> expected = std::nullopt);
void save_mask(const EditMask& m, const std::filesystem::path& path);

/// src * (1 - M) + tar * M with M broadcast over channels. Where M is
/// exactly 0 or 1 the corresponding operand is copied unchanged.
Latent blend_latents(const Latent& src, const Latent& tar, const EditMask& mask);

void require_mask_matches(const EditMask& mask, const Shape& shape);

}  // namespace flowinv
