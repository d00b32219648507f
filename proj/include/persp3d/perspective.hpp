#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"

#include <array>
#include <vector>

namespace persp3d {

template <typename S> struct RoIT {
  S x0{}, y0{}, x1{}, y1{};

  S width() const { return x1 - x0; }
  S height() const { return y1 - y0; }
  Vec2<S> center() const { return Vec2<S>((x0 + x1) / S(2), (y0 + y1) / S(2)); }
  bool valid() const { return x1 > x0 && y1 > y0; }
};

using RoI = RoIT<double>;

/// RoI doubled in both dimensions about its center. This is the frame the
/// nine points are normalized in.
template <typename S> RoIT<S> extended_roi(const RoIT<S>& r) {
  const Vec2<S> c = r.center();
  return RoIT<S>{c.x() - r.width(), c.y() - r.height(), c.x() + r.width(), c.y() + r.height()};
}

/// Nine image points in extended-RoI normalized coordinates. Column 0 is the
/// projected 3D center, columns 1..8 the corners a..h. Ground-truth points
/// are clipped to [0,1] with the clip recorded per point.
template <typename S> struct PerspectivePointsT {
  Points29<S> points{Points29<S>::Zero()};
  std::array<bool, 9> clipped{};
};

using PerspectivePoints = PerspectivePointsT<double>;

template <typename S> Vec2<S> normalize_pixel(const Vec2<S>& px, const RoIT<S>& roi) {
  const RoIT<S> e = extended_roi(roi);
  return Vec2<S>((px.x() - e.x0) / e.width(), (px.y() - e.y0) / e.height());
}

template <typename S> Vec2<S> denormalize_pixel(const Vec2<S>& q, const RoIT<S>& roi) {
  const RoIT<S> e = extended_roi(roi);
  return Vec2<S>(e.x0 + q.x() * e.width(), e.y0 + q.y() * e.height());
}

/// Normalize nine pixel locations into the extended RoI, clipping to [0,1]
/// and recording which points were clipped.
template <typename S>
PerspectivePointsT<S> normalize_points(const Points29<S>& pixels, const RoIT<S>& roi) {
  PerspectivePointsT<S> out;
  for (int k = 0; k < 9; ++k) {
    const Vec2<S> q = normalize_pixel(Vec2<S>(pixels.col(k)), roi);
    const Vec2<S> qc(clamp01(q.x()), clamp01(q.y()));
    out.clipped[size_t(k)] = (qc != q);
    out.points.col(k) = qc;
  }
  return out;
}

/// Inverse of normalize_points for unclipped points.
template <typename S>
Points29<S> denormalize_points(const Points29<S>& normalized, const RoIT<S>& roi) {
  Points29<S> out;
  for (int k = 0; k < 9; ++k) {
    out.col(k) = denormalize_pixel(Vec2<S>(normalized.col(k)), roi);
  }
  return out;
}

/// Project center + corners and normalize, without clipping. This is the
/// exact differentiable image of a box used by the consistency loss.
template <typename S>
Points29<S> project_box_points(const Box3DT<S>& box, const CameraT<S>& cam, const RoIT<S>& roi) {
  Points29<S> norm;
  norm.col(0) = normalize_pixel(project_point(cam, box.center), roi);
  const Corners38<S> cs = corners(box);
  for (int i = 0; i < 8; ++i) {
    norm.col(i + 1) = normalize_pixel(project_point(cam, Vec3<S>(cs.col(i))), roi);
  }
  return norm;
}

/// Ground-truth perspective points of a box: projections of the 3D center and
/// the eight corners, normalized and clipped into the extended RoI.
template <typename S>
PerspectivePointsT<S> gt_perspective_points(const Box3DT<S>& box, const CameraT<S>& cam,
                                            const RoIT<S>& roi) {
  Points29<S> pixels;
  pixels.col(0) = project_point(cam, box.center);
  const Corners38<S> cs = corners(box);
  for (int i = 0; i < 8; ++i) {
    pixels.col(i + 1) = project_point(cam, Vec3<S>(cs.col(i)));
  }
  return normalize_points(pixels, roi);
}

/// Per-class template dictionary with mixing coefficients, both stored as raw
/// logits. Templates activate through a sigmoid into (0,1); coefficients
/// normalize through a softmax over the K templates of a class.
template <typename S> struct TemplateBankT {
  int num_classes{0};
  int templates_per_class{0};
  std::vector<Points29<S>> templates;  // row-major: class * K + k
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> coeff_logits;  // C x K

  static TemplateBankT zeros(int num_classes, int templates_per_class) {
    TemplateBankT bank;
    bank.num_classes = num_classes;
    bank.templates_per_class = templates_per_class;
    bank.templates.assign(size_t(num_classes) * size_t(templates_per_class),
                          Points29<S>::Zero());
    bank.coeff_logits.setZero(num_classes, templates_per_class);
    return bank;
  }

  const Points29<S>& template_at(int c, int k) const {
    return templates[size_t(c) * size_t(templates_per_class) + size_t(k)];
  }
  Points29<S>& template_at(int c, int k) {
    return templates[size_t(c) * size_t(templates_per_class) + size_t(k)];
  }
};

using TemplateBank = TemplateBankT<double>;

template <typename S> inline S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

/// Softmax over a vector of logits (shift-invariant form).
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> softmax(const Eigen::Matrix<S, Eigen::Dynamic, 1>& logits) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> w = (logits.array() - logits.maxCoeff()).exp();
  return w / w.sum();
}

/// The mixed perspective-point prediction for one class: the softmax-weighted
/// sum of the sigmoid-activated templates.
template <typename S>
PerspectivePointsT<S> mix_templates(const TemplateBankT<S>& bank, int class_id) {
  if (class_id < 0 || class_id >= bank.num_classes) {
    throw Error("mix_templates: class index out of range");
  }
  const Eigen::Matrix<S, Eigen::Dynamic, 1> w =
      softmax<S>(bank.coeff_logits.row(class_id).transpose());
  PerspectivePointsT<S> out;
  out.points.setZero();
  for (int k = 0; k < bank.templates_per_class; ++k) {
    out.points += w[k] * bank.template_at(class_id, k).unaryExpr([](S v) { return sigmoid(v); });
  }
  return out;
}

/// Intersection of lines (p1,p2) and (q1,q2) in homogeneous coordinates.
/// A result with a near-zero w component is a vanishing point at infinity
/// whose (x,y) part is the common direction.
template <typename S>
Vec3<S> line_intersection(const Vec2<S>& p1, const Vec2<S>& p2, const Vec2<S>& q1,
                          const Vec2<S>& q2) {
  if ((p1 - p2).squaredNorm() < S(kCoincidentEps) * S(kCoincidentEps) ||
      (q1 - q2).squaredNorm() < S(kCoincidentEps) * S(kCoincidentEps)) {
    throw DegenerateLine("line_intersection: coincident endpoints");
  }
  const Vec3<S> l1 = Vec3<S>(p1.x(), p1.y(), S(1)).cross(Vec3<S>(p2.x(), p2.y(), S(1)));
  const Vec3<S> l2 = Vec3<S>(q1.x(), q1.y(), S(1)).cross(Vec3<S>(q2.x(), q2.y(), S(1)));
  return l1.cross(l2);
}

}  // namespace persp3d
