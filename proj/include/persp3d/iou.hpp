#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/common.hpp"

#include <array>
#include <vector>

namespace persp3d {

// Collinearity tolerance for the polygon clipper.
inline constexpr double kClipEps = 1e-12;

/// Signed area of a polygon (positive for counterclockwise).
template <typename S> S polygon_area(const std::vector<Vec2<S>>& poly) {
  if (poly.size() < 3) return S(0);
  S acc = S(0);
  for (size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2<S>& p = poly[i];
    const Vec2<S>& q = poly[(i + 1) % n];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return acc / S(2);
}

/// Plan-view (x,y) footprint of a box, counterclockwise.
template <typename S> std::array<Vec2<S>, 4> plan_corners(const Box3DT<S>& box) {
  const Corners38<S> cs = corners(box);
  std::array<Vec2<S>, 4> out;
  for (int i = 0; i < 4; ++i) out[size_t(i)] = cs.col(i).template head<2>();
  return out;
}

/// Sutherland-Hodgman clip of a convex subject polygon against a convex
/// counterclockwise clip polygon.
template <typename S>
std::vector<Vec2<S>> clip_convex(std::vector<Vec2<S>> subject,
                                 const std::array<Vec2<S>, 4>& clip) {
  for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2<S>& c1 = clip[e];
    const Vec2<S>& c2 = clip[(e + 1) % clip.size()];
    const Vec2<S> dir = c2 - c1;
    const auto side = [&](const Vec2<S>& p) {
      return dir.x() * (p.y() - c1.y()) - dir.y() * (p.x() - c1.x());
    };
    std::vector<Vec2<S>> out;
    out.reserve(subject.size() + 4);
    for (size_t i = 0, n = subject.size(); i < n; ++i) {
      const Vec2<S>& s = subject[i];
      const Vec2<S>& t = subject[(i + 1) % n];
      const S ds = side(s);
      const S dt = side(t);
      const bool s_in = ds >= S(-kClipEps);
      const bool t_in = dt >= S(-kClipEps);
      if (s_in != t_in) {
        const S denom = ds - dt;
        if (std::abs(denom) > S(kClipEps)) {
          out.push_back(s + (t - s) * (ds / denom));
        }
      }
      if (t_in) out.push_back(t);
    }
    subject = std::move(out);
  }
  return subject;
}

/// Intersection area of the plan footprints of two gravity-aligned boxes.
template <typename S> S plan_intersection_area(const Box3DT<S>& a, const Box3DT<S>& b) {
  const std::array<Vec2<S>, 4> ca = plan_corners(a);
  const std::array<Vec2<S>, 4> cb = plan_corners(b);
  std::vector<Vec2<S>> subject(ca.begin(), ca.end());
  const std::vector<Vec2<S>> inter = clip_convex(subject, cb);
  return std::abs(polygon_area(inter));
}

/// 3D IoU of two gravity-aligned boxes: rotated-rectangle intersection in
/// plan view times the vertical extent overlap.
template <typename S> S iou3d(const Box3DT<S>& a, const Box3DT<S>& b) {
  const S z_lo = std::max(a.center.z() - a.size.z() * S(0.5),
                          b.center.z() - b.size.z() * S(0.5));
  const S z_hi = std::min(a.center.z() + a.size.z() * S(0.5),
                          b.center.z() + b.size.z() * S(0.5));
  const S dz = z_hi - z_lo;
  if (dz <= S(0)) return S(0);
  const S area = plan_intersection_area(a, b);
  const S inter = area * dz;
  const S va = a.size.prod();
  const S vb = b.size.prod();
  const S denom = va + vb - inter;
  if (denom <= S(0)) return S(0);
  const S iou = inter / denom;
  return iou < S(0) ? S(0) : (iou > S(1) ? S(1) : iou);
}

}  // namespace persp3d
