#pragma once

#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"

#include <array>

namespace persp3d {

/// Gravity-aligned oriented box: center in world meters, size = (w, l, h)
/// extents, yaw about the world z axis, normalized to [-pi, pi).
template <typename S> struct Box3DT {
  Vec3<S> center{Vec3<S>::Zero()};
  Vec3<S> size{Vec3<S>::Ones()};
  S yaw{};
};

using Box3D = Box3DT<double>;

/// Estimated 3D attributes: everything of a box except its projected center.
template <typename S> struct Attrs3DT {
  S distance{};        // camera center to box center, meters
  Vec3<S> size{Vec3<S>::Ones()};
  S yaw{};
};

using Attrs3D = Attrs3DT<double>;

// Corner order: bottom face a,b,c,d counterclockwise viewed from above
// starting at (+w/2, +l/2), then top face e,f,g,h vertically above a,b,c,d.
inline constexpr std::array<std::array<int, 3>, 8> kCornerSigns{{
    {+1, +1, -1}, {-1, +1, -1}, {-1, -1, -1}, {+1, -1, -1},
    {+1, +1, +1}, {-1, +1, +1}, {-1, -1, +1}, {+1, -1, +1},
}};

template <typename S> Mat3<S> yaw_rotation(S yaw) {
  const S c = std::cos(yaw), s = std::sin(yaw);
  Mat3<S> r;
  r << c, -s, S(0),
       s, c, S(0),
       S(0), S(0), S(1);
  return r;
}

/// Derivative of yaw_rotation with respect to yaw.
template <typename S> Mat3<S> yaw_rotation_deriv(S yaw) {
  const S c = std::cos(yaw), s = std::sin(yaw);
  Mat3<S> r;
  r << -s, -c, S(0),
       c, -s, S(0),
       S(0), S(0), S(0);
  return r;
}

/// The eight corners of a box in convention order, as columns.
template <typename S> Corners38<S> corners(const Box3DT<S>& box) {
  const Mat3<S> rot = yaw_rotation(box.yaw);
  Corners38<S> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3<S> local(S(kCornerSigns[i][0]) * box.size.x() * S(0.5),
                        S(kCornerSigns[i][1]) * box.size.y() * S(0.5),
                        S(kCornerSigns[i][2]) * box.size.z() * S(0.5));
    out.col(i) = box.center + rot * local;
  }
  return out;
}

/// Compose a box from its projected center, its distance from the camera
/// center, and its remaining 3D attributes.
template <typename S>
Box3DT<S> compose_box(const Vec2<S>& center2d, S distance, const Vec3<S>& size, S yaw,
                      const CameraT<S>& cam) {
  Box3DT<S> box;
  box.center = back_project(cam, center2d, distance);
  box.size = size;
  box.yaw = wrap_angle(yaw);
  return box;
}

template <typename S>
Box3DT<S> compose_box(const Vec2<S>& center2d, const Attrs3DT<S>& attrs, const CameraT<S>& cam) {
  return compose_box(center2d, attrs.distance, attrs.size, attrs.yaw, cam);
}

}  // namespace persp3d
