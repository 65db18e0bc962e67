// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/mask.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_pgm(const std::filesystem::path& path) { return lower(path.extension().string()) == ".pgm"; }

double parse_binary_value(const std::string& token, const std::string& where) {
  if (token == "0") return 0.0;
  if (token == "1") return 1.0;
  throw FormatError(where + ": value '" + token + "' is not 0 or 1");
}

// Next whitespace-separated token of a P2 file, skipping '#' comments.
bool next_pgm_token(std::istream& in, std::string& token) {
  token.clear();
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!token.empty()) return true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(c);
  }
  return !token.empty();
}

std::size_t parse_size(const std::string& token, const std::string& what, const std::string& file) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw FormatError(file + ": malformed header, " + what + " '" + token + "' is not a non-negative integer");
  }
  return std::stoul(token);
}

EditMask load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mask file: " + path.string());
  const std::string file = path.string();
  std::string token;
  if (!next_pgm_token(in, token) || token != "P2") {
    throw FormatError(file + ": malformed header, expected magic 'P2'");
  }
  std::string wt, ht, mt;
  if (!next_pgm_token(in, wt) || !next_pgm_token(in, ht) || !next_pgm_token(in, mt)) {
    throw FormatError(file + ": malformed header, expected width, height and maxval");
  }
  const std::size_t width = parse_size(wt, "width", file);
  const std::size_t height = parse_size(ht, "height", file);
  const std::size_t maxval = parse_size(mt, "maxval", file);
  if (maxval != 1) {
    throw FormatError(file + ": maxval must be 1 for mask files (got " + std::to_string(maxval) + ")");
  }
  if (width == 0 || height == 0) throw FormatError(file + ": mask dimensions must be positive");
  std::vector<double> values;
  values.reserve(width * height);
  while (next_pgm_token(in, token)) {
    values.push_back(parse_binary_value(token, file + " pixel " + std::to_string(values.size())));
  }
  if (values.size() != width * height) {
    throw FormatError(file + ": expected " + std::to_string(width * height) + " pixels, found " +
                      std::to_string(values.size()));
  }
  return EditMask(height, width, std::move(values));
}

EditMask load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mask file: " + path.string());
  const std::string file = path.string();
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(parse_binary_value(trim(cell), file + " row " + std::to_string(height + 1)));
      ++count;
    }
    if (height == 0) {
      width = count;
    } else if (count != width) {
      throw FormatError(file + ": row " + std::to_string(height + 1) + " has " + std::to_string(count) +
                        " values, expected " + std::to_string(width));
    }
    ++height;
  }
  if (height == 0 || width == 0) throw FormatError(file + ": empty mask");
  return EditMask(height, width, std::move(values));
}

}  // namespace

const char* to_string(EditType type) {
  switch (type) {
    case EditType::Local:
      return "local";
    case EditType::Background:
      return "background";
    case EditType::Global:
      return "global";
    case EditType::Other:
      return "other";
  }
  return "?";
}

EditType parse_edit_type(const std::string& text) {
  const std::string t = lower(text);
  if (t == "local") return EditType::Local;
  if (t == "background") return EditType::Background;
  if (t == "global") return EditType::Global;
  if (t == "other") return EditType::Other;
  throw ConfigError("unknown edit type '" + text + "' (expected local, background, global or other)");
}

BBox BBox::from_corners(GridPoint p, GridPoint q) {
  return BBox{std::min(p.x, q.x), std::min(p.y, q.y), std::max(p.x, q.x), std::max(p.y, q.y)};
}

std::optional<BBox> BBox::clamped(std::size_t height, std::size_t width) const {
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  if (x2 < 0 || y2 < 0 || x1 >= w || y1 >= h) return std::nullopt;
  return BBox{std::max(x1, 0L), std::max(y1, 0L), std::min(x2, w - 1), std::min(y2, h - 1)};
}

bool BBox::contains(std::size_t row, std::size_t col) const {
  const long r = static_cast<long>(row);
  const long c = static_cast<long>(col);
  return c >= x1 && c <= x2 && r >= y1 && r <= y2;
}

EditMask::EditMask(std::size_t height, std::size_t width, double fill, bool soft)
    : EditMask(height, width, std::vector<double>(height * width, fill), soft) {}

EditMask::EditMask(std::size_t height, std::size_t width, std::vector<double> values, bool soft)
    : height_(height), width_(width), soft_(soft), values_(std::move(values)) {
  if (values_.size() != height_ * width_) {
    throw ShapeError("mask of " + std::to_string(height_) + "x" + std::to_string(width_) + " needs " +
                     std::to_string(height_ * width_) + " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (soft_ ? !(v >= 0.0 && v <= 1.0) : !(v == 0.0 || v == 1.0)) {
      throw ConfigError(std::string(soft_ ? "soft" : "hard") + " mask value out of range: " + std::to_string(v));
    }
  }
}

void EditMask::set(std::size_t row, std::size_t col, double value) {
  if (soft_ ? !(value >= 0.0 && value <= 1.0) : !(value == 0.0 || value == 1.0)) {
    throw ConfigError("mask value out of range: " + std::to_string(value));
  }
  values_[row * width_ + col] = value;
}

std::size_t EditMask::support_size() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

EditMask complement(const EditMask& m) {
  std::vector<double> values(m.values().size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 1.0 - m.values()[i];
  return EditMask(m.height(), m.width(), std::move(values), m.soft());
}

EditMask box_indicator(const BBox& box, std::size_t height, std::size_t width) {
  EditMask out(height, width);
  const auto clamped = box.clamped(height, width);
  if (!clamped) return out;
  for (long r = clamped->y1; r <= clamped->y2; ++r) {
    for (long c = clamped->x1; c <= clamped->x2; ++c) out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 1.0);
  }
  return out;
}

EditMask build_mask(EditType type, const BBox& box, const Segmenter& segmenter, std::size_t height,
                    std::size_t width, std::size_t dilation_kernel) {
  if (type == EditType::Global) return EditMask::ones(height, width);

  if (box.degenerate()) {
    throw ConfigError(std::string("degenerate bounding box (zero area) for ") + to_string(type) + " mask");
  }
  const auto clamped = box.clamped(height, width);
  if (!clamped) throw ConfigError("bounding box lies outside the " + std::to_string(height) + "x" +
                                  std::to_string(width) + " grid");
  if (type == EditType::Other) return box_indicator(*clamped, height, width);

  if (!segmenter) throw ConfigError("local/background masks need a segmenter");
  EditMask segmented = segmenter(*clamped, height, width);
  if (segmented.height() != height || segmented.width() != width) {
    throw ShapeError("segmenter returned a mask of the wrong shape");
  }
  segmented = dilate_mask(segmented, dilation_kernel);
  return type == EditType::Local ? segmented : complement(segmented);
}

EditMask threshold_segment(const Latent& reference, const BBox& box, double tau, std::size_t channel) {
  const Shape& shape = reference.shape();
  if (channel >= shape.channels()) {
    throw ShapeError("threshold_segment channel " + std::to_string(channel) + " outside " + shape.to_string());
  }
  EditMask out(shape.height(), shape.width());
  for (std::size_t r = 0; r < shape.height(); ++r) {
    for (std::size_t c = 0; c < shape.width(); ++c) {
      if (box.contains(r, c) && reference.at(channel, r * shape.width() + c) > tau) out.set(r, c, 1.0);
    }
  }
  return out;
}

Segmenter threshold_segmenter(Latent reference, double tau, std::size_t channel) {
  return [reference = std::move(reference), tau, channel](const BBox& box, std::size_t height, std::size_t width) {
    if (reference.shape().height() != height || reference.shape().width() != width) {
      throw ShapeError("threshold segmenter reference does not match the mask grid");
    }
    return threshold_segment(reference, box, tau, channel);
  };
}

EditMask dilate_mask(const EditMask& m, std::size_t k) {
  if (k == 0 || k % 2 == 0) throw ConfigError("dilation kernel must be an odd positive integer, got " + std::to_string(k));
  if (k == 1) return m;
  const long radius = static_cast<long>(k / 2);
  const long h = static_cast<long>(m.height());
  const long w = static_cast<long>(m.width());
  std::vector<double> out(m.values().size(), 0.0);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double best = 0.0;
      for (long dr = std::max(0L, r - radius); dr <= std::min(h - 1, r + radius); ++dr) {
        for (long dc = std::max(0L, c - radius); dc <= std::min(w - 1, c + radius); ++dc) {
          best = std::max(best, m.values()[static_cast<std::size_t>(dr * w + dc)]);
        }
      }
      out[static_cast<std::size_t>(r * w + c)] = best;
    }
  }
  return EditMask(m.height(), m.width(), std::move(out), m.soft());
}

EditMask load_mask(const std::filesystem::path& path, std::optional<std::pair<std::size_t, std::size_t>> expected) {
  EditMask m = is_pgm(path) ? load_pgm(path) : load_csv(path);
  if (expected && (m.height() != expected->first || m.width() != expected->second)) {
    throw FormatError(path.string() + ": mask is " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                      ", expected " + std::to_string(expected->first) + "x" + std::to_string(expected->second));
  }
  return m;
}

void save_mask(const EditMask& m, const std::filesystem::path& path) {
  if (m.soft()) {
    for (double v : m.values()) {
      if (v != 0.0 && v != 1.0) throw ConfigError("only binary masks can be saved; soft value " + std::to_string(v));
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open mask file for writing: " + path.string());
  const bool pgm = is_pgm(path);
  if (pgm) out << "P2\n" << m.width() << ' ' << m.height() << "\n1\n";
  for (std::size_t r = 0; r < m.height(); ++r) {
    for (std::size_t c = 0; c < m.width(); ++c) {
      if (c > 0) out << (pgm ? ' ' : ',');
      out << (m.at(r, c) != 0.0 ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing mask file: " + path.string());
}

void require_mask_matches(const EditMask& mask, const Shape& shape) {
  if (mask.height() != shape.height() || mask.width() != shape.width()) {
    throw ShapeError("mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                     " but latent " + shape.to_string() + " is " + std::to_string(shape.height()) + "x" +
                     std::to_string(shape.width()) + " spatially");
  }
}

Latent blend_latents(const Latent& src, const Latent& tar, const EditMask& mask) {
  require_same_shape(src, tar, "blend_latents");
  require_mask_matches(mask, src.shape());
  Latent out(src.shape());
  const std::size_t pixels = src.shape().spatial();
  for (std::size_t c = 0; c < src.shape().channels(); ++c) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const double m = mask.values()[p];
      if (m == 0.0) {
        out.at(c, p) = src.at(c, p);
      } else if (m == 1.0) {
        out.at(c, p) = tar.at(c, p);
      } else {
        out.at(c, p) = src.at(c, p) * (1.0 - m) + tar.at(c, p) * m;
      }
    }
  }
  return out;
}

}  // namespace flowinv
