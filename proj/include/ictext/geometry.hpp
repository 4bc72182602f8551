#pragma once

#include <array>

namespace ictext {

/// Axis-aligned box in continuous pixel corner coordinates.
/// (x1, y1) is the top-left corner, (x2, y2) the bottom-right one.
struct BoxXYXY {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }

  bool is_valid() const noexcept;

  /// Throws ValidationError when x1 > x2, y1 > y2 or any coordinate is not finite.
  void validate() const;

  /// Builds a corner box from top-left corner plus size.
  static BoxXYXY from_xywh(double x, double y, double w, double h);
  /// Builds a corner box from center plus size.
  static BoxXYXY from_cxcywh(double cx, double cy, double w, double h);

  friend bool operator==(const BoxXYXY&, const BoxXYXY&) = default;
};

struct ImageDims {
  int width = 1;
  int height = 1;

  void validate() const;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Clockwise quadrant rotation of an image.
enum class Rotation { deg0 = 0, deg90 = 90, deg180 = 180, deg270 = 270 };

inline constexpr std::array<Rotation, 4> kAllRotations = {
    Rotation::deg0, Rotation::deg90, Rotation::deg180, Rotation::deg270};

/// Throws ValidationError for anything but 0, 90, 180, 270.
Rotation rotation_from_degrees(int degrees);
int degrees(Rotation r) noexcept;
Rotation inverse(Rotation r) noexcept;

/// Image dimensions after rotating an image of size `dims` by `r`.
ImageDims rotated_dims(ImageDims dims, Rotation r) noexcept;

/// Intersection over union. Total over valid boxes: returns 0 when the
/// union is empty (two degenerate boxes).
double iou(const BoxXYXY& a, const BoxXYXY& b);

/// Complete-IoU: IoU minus the normalised squared center distance minus the
/// aspect-ratio consistency term alpha * v. Rejects zero-area boxes.
double ciou(const BoxXYXY& a, const BoxXYXY& b);

/// Maps a box from the original image frame into the frame of the image
/// rotated clockwise by `rot`. For 90 degrees a point (x, y) goes to
/// (height - y, x). The box must lie inside [0, width] x [0, height].
BoxXYXY rotate_box(const BoxXYXY& b, Rotation rot, ImageDims dims);

/// Inverse of rotate_box: `b` is expressed in the rotated frame of an image
/// whose unrotated size is `original_dims`.
BoxXYXY unrotate_box(const BoxXYXY& b, Rotation rot, ImageDims original_dims);

}  // namespace ictext
