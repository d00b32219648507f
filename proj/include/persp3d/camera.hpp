#pragma once

#include "persp3d/common.hpp"

namespace persp3d {

/// Pinhole intrinsics in pixels.
template <typename S> struct IntrinsicsT {
  S fx{}, fy{};
  S cx{}, cy{};
  S width{}, height{};
};

/// Gravity-aligned extrinsics.
///
/// World frame: right handed, z up (gravity is -z), origin on the floor
/// directly below the camera center. Camera frame: x right, y down,
/// z along the optical axis. With tilt = roll = 0 the camera looks along
/// world +y; positive tilt pitches the optical axis toward the floor and
/// roll turns about the optical axis. Heading (yaw) is fixed to zero, so
/// the world frame is defined up to the camera heading.
template <typename S> struct ExtrinsicsT {
  S tilt{};
  S roll{};
  S cam_height{S(1)};
};

template <typename S> struct CameraT {
  IntrinsicsT<S> intr;
  ExtrinsicsT<S> ext;
};

using Intrinsics = IntrinsicsT<double>;
using Extrinsics = ExtrinsicsT<double>;
using Camera = CameraT<double>;

/// World-to-camera rotation, composed as roll * tilt * axis swap.
template <typename S> Mat3<S> rotation_matrix(const ExtrinsicsT<S>& e) {
  Mat3<S> swap;  // world (x, y, z) -> camera (x, -z, y) at zero angles
  swap << S(1), S(0), S(0),
          S(0), S(0), S(-1),
          S(0), S(1), S(0);
  const S ct = std::cos(e.tilt), st = std::sin(e.tilt);
  Mat3<S> rx;
  rx << S(1), S(0), S(0),
        S(0), ct, -st,
        S(0), st, ct;
  const S cr = std::cos(e.roll), sr = std::sin(e.roll);
  Mat3<S> rz;
  rz << cr, -sr, S(0),
        sr, cr, S(0),
        S(0), S(0), S(1);
  return rz * rx * swap;
}

/// Camera center in world coordinates.
template <typename S> Vec3<S> camera_center(const ExtrinsicsT<S>& e) {
  return Vec3<S>(S(0), S(0), e.cam_height);
}

template <typename S> Vec3<S> world_to_camera(const CameraT<S>& cam, const Vec3<S>& xw) {
  return rotation_matrix(cam.ext) * (xw - camera_center(cam.ext));
}

/// Project a world point to pixels. Optional jacobian is d(u,v)/d(world point).
/// Throws BehindCamera when the camera-frame depth is at or below kDepthEps.
template <typename S>
Vec2<S> project_point(const CameraT<S>& cam, const Vec3<S>& xw,
                      Eigen::Matrix<S, 2, 3>* jac_world = nullptr) {
  const Mat3<S> rot = rotation_matrix(cam.ext);
  const Vec3<S> xc = rot * (xw - camera_center(cam.ext));
  if (!(xc.z() > S(kDepthEps))) {
    throw BehindCamera("project_point: depth " + std::to_string(double(xc.z())) +
                       " not in front of camera");
  }
  const S inv_z = S(1) / xc.z();
  Vec2<S> px(cam.intr.fx * xc.x() * inv_z + cam.intr.cx,
             cam.intr.fy * xc.y() * inv_z + cam.intr.cy);
  if (jac_world) {
    Eigen::Matrix<S, 2, 3> dpix_dxc;
    dpix_dxc << cam.intr.fx * inv_z, S(0), -cam.intr.fx * xc.x() * inv_z * inv_z,
                S(0), cam.intr.fy * inv_z, -cam.intr.fy * xc.y() * inv_z * inv_z;
    *jac_world = dpix_dxc * rot;
  }
  return px;
}

/// Invert the projection given the Euclidean distance from the camera center
/// to the point (not the depth along the optical axis). Optional jacobian is
/// d(world point)/d(u, v, distance).
template <typename S>
Vec3<S> back_project(const CameraT<S>& cam, const Vec2<S>& px, S distance,
                     Mat3<S>* jac_uvd = nullptr) {
  if (!(distance > S(0))) {
    throw Error("back_project: distance must be positive");
  }
  const Vec3<S> g((px.x() - cam.intr.cx) / cam.intr.fx,
                  (px.y() - cam.intr.cy) / cam.intr.fy, S(1));
  const S n = g.norm();
  const Vec3<S> dir = g / n;
  const Mat3<S> rot_t = rotation_matrix(cam.ext).transpose();
  const Vec3<S> xw = rot_t * (distance * dir) + camera_center(cam.ext);
  if (jac_uvd) {
    const Mat3<S> ddir_dg = (Mat3<S>::Identity() - dir * dir.transpose()) / n;
    jac_uvd->col(0) = rot_t * (distance * ddir_dg * Vec3<S>(S(1) / cam.intr.fx, S(0), S(0)));
    jac_uvd->col(1) = rot_t * (distance * ddir_dg * Vec3<S>(S(0), S(1) / cam.intr.fy, S(0)));
    jac_uvd->col(2) = rot_t * dir;
  }
  return xw;
}

}  // namespace persp3d
