#include "ictext/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ictext/errors.hpp"

namespace ictext {

bool BoxXYXY::is_valid() const noexcept {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

void BoxXYXY::validate() const {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw ValidationError("box has a non-finite coordinate");
  }
  if (x1 > x2 || y1 > y2) {
    throw ValidationError("box corners are inverted (x1 > x2 or y1 > y2)");
  }
}

BoxXYXY BoxXYXY::from_xywh(double x, double y, double w, double h) {
  return BoxXYXY{x, y, x + w, y + h};
}

BoxXYXY BoxXYXY::from_cxcywh(double cx, double cy, double w, double h) {
  return BoxXYXY{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

void ImageDims::validate() const {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
}

Rotation rotation_from_degrees(int deg) {
  switch (deg) {
    case 0: return Rotation::deg0;
    case 90: return Rotation::deg90;
    case 180: return Rotation::deg180;
    case 270: return Rotation::deg270;
    default: throw ValidationError("rotation must be one of 0, 90, 180, 270; got " +
                                   std::to_string(deg));
  }
}

int degrees(Rotation r) noexcept { return static_cast<int>(r); }

Rotation inverse(Rotation r) noexcept {
  switch (r) {
    case Rotation::deg90: return Rotation::deg270;
    case Rotation::deg270: return Rotation::deg90;
    default: return r;
  }
}

ImageDims rotated_dims(ImageDims dims, Rotation r) noexcept {
  if (r == Rotation::deg90 || r == Rotation::deg270) return ImageDims{dims.height, dims.width};
  return dims;
}

double iou(const BoxXYXY& a, const BoxXYXY& b) {
  a.validate();
  b.validate();
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double ciou(const BoxXYXY& a, const BoxXYXY& b) {
  a.validate();
  b.validate();
  if (a.width() <= 0.0 || a.height() <= 0.0 || b.width() <= 0.0 || b.height() <= 0.0) {
    throw ValidationError("ciou requires boxes with positive area");
  }
  const double overlap = iou(a, b);

  const double dx = a.center_x() - b.center_x();
  const double dy = a.center_y() - b.center_y();
  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double center_penalty = (dx * dx + dy * dy) / (cw * cw + ch * ch);

  constexpr double k = 4.0 / (std::numbers::pi * std::numbers::pi);
  const double dtheta = std::atan(b.width() / b.height()) - std::atan(a.width() / a.height());
  const double v = k * dtheta * dtheta;
  // alpha is 0 when v is 0; this also covers the 0/0 case iou == 1, v == 0.
  const double alpha = v > 0.0 ? v / ((1.0 - overlap) + v) : 0.0;

  return overlap - center_penalty - alpha * v;
}

namespace {

struct Point {
  double x;
  double y;
};

// Clockwise rotation of a point inside an image of size w x h.
Point rotate_point(Point p, Rotation r, double w, double h) {
  switch (r) {
    case Rotation::deg0: return p;
    case Rotation::deg90: return {h - p.y, p.x};
    case Rotation::deg180: return {w - p.x, h - p.y};
    case Rotation::deg270: return {p.y, w - p.x};
  }
  return p;
}

void check_inside(const BoxXYXY& b, ImageDims dims) {
  b.validate();
  dims.validate();
  if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > dims.width || b.y2 > dims.height) {
    throw ValidationError("box lies outside the " + std::to_string(dims.width) + "x" +
                          std::to_string(dims.height) + " image");
  }
}

BoxXYXY rotate_corners(const BoxXYXY& b, Rotation rot, ImageDims dims) {
  const double w = dims.width;
  const double h = dims.height;
  const Point p = rotate_point({b.x1, b.y1}, rot, w, h);
  const Point q = rotate_point({b.x2, b.y2}, rot, w, h);
  return BoxXYXY{std::min(p.x, q.x), std::min(p.y, q.y), std::max(p.x, q.x),
                 std::max(p.y, q.y)};
}

}  // namespace

BoxXYXY rotate_box(const BoxXYXY& b, Rotation rot, ImageDims dims) {
  check_inside(b, dims);
  return rotate_corners(b, rot, dims);
}

BoxXYXY unrotate_box(const BoxXYXY& b, Rotation rot, ImageDims original_dims) {
  original_dims.validate();
  const ImageDims frame = rotated_dims(original_dims, rot);
  check_inside(b, frame);
  return rotate_corners(b, inverse(rot), frame);
}

}  // namespace ictext
