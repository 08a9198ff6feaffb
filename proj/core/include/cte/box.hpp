#pragma once

namespace cte {

/// Axis-aligned box, center + size, in input-image pixels.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double right() const { return cx + 0.5 * w; }
  double bottom() const { return cy + 0.5 * h; }

  static Box from_tlwh(double l, double t, double w, double h) {
    return Box{l + 0.5 * w, t + 0.5 * h, w, h};
  }
};

/// Clips the box to [0, width] x [0, height], keeping sizes >= min_size.
inline Box clip_box(const Box& b, double width, double height, double min_size = 1e-3) {
  auto clamp = [](double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); };
  double l = clamp(b.left(), 0.0, width);
  double r = clamp(b.right(), 0.0, width);
  double t = clamp(b.top(), 0.0, height);
  double bt = clamp(b.bottom(), 0.0, height);
  if (r - l < min_size) {  // degenerate after clamping, grow inward
    if (l + min_size <= width) {
      r = l + min_size;
    } else {
      l = r - min_size;
    }
  }
  if (bt - t < min_size) {
    if (t + min_size <= height) {
      bt = t + min_size;
    } else {
      t = bt - min_size;
    }
  }
  return Box{0.5 * (l + r), 0.5 * (t + bt), r - l, bt - t};
}

}  // namespace cte
