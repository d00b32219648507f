#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"
#include "persp3d/perspective.hpp"

#include <array>

namespace persp3d {

struct LossWeights {
  double pp{1}, p{1}, l3d{1}, proj{1};          // top-level terms
  double d1{1}, d2{1}, grav{1};                 // inside the perspective term
  double dis{1}, size{1}, ori{1}, box3d{1};     // inside the 3D term
};

/// Perspective and consistency terms join the objective only in the full
/// phase; the warmup phase zeroes their weights.
enum class Phase { warmup, full };

struct LossBreakdown {
  double pp{}, d1{}, d2{}, grav{}, p{}, dis{}, size{}, ori{}, box3d{}, l3d{}, proj{};
  double total{};
};

inline double weighted_total(double pp, double p, double l3d, double proj,
                             const LossWeights& w, Phase phase) {
  const double wp = (phase == Phase::warmup) ? 0.0 : w.p;
  const double wproj = (phase == Phase::warmup) ? 0.0 : w.proj;
  return w.pp * pp + wp * p + w.l3d * l3d + wproj * proj;
}

template <typename S> struct ValueGrad29 {
  S value{};
  Points29<S> grad{Points29<S>::Zero()};
};

/// Mean squared error over the 18 coordinates, with gradient in the first
/// argument.
template <typename S>
ValueGrad29<S> loss_pp(const Points29<S>& pred, const Points29<S>& gt) {
  ValueGrad29<S> r;
  const Points29<S> diff = pred - gt;
  r.value = diff.squaredNorm() / S(18);
  r.grad = diff * (S(2) / S(18));
  return r;
}

template <typename S>
ValueGrad29<S> loss_pp(const PerspectivePointsT<S>& pred, const PerspectivePointsT<S>& gt) {
  return loss_pp(pred.points, gt.points);
}

namespace detail {

// Transposed cross-product jacobians: for y = a x b, grad_a = b x g, grad_b = g x a.

template <typename S> struct VpPairTerm {
  S value{};
  bool degenerate{false};
};

// One vanishing-point agreement term. The two intersections come from line
// pairs (P[q1[0]],P[q1[1]]) x (P[q1[2]],P[q1[3]]) and the same for q2. Finite
// intersections are compared with a Huber distance; intersections at infinity
// (relative |w| below kParallelKappa) are compared by direction angle.
template <typename S>
VpPairTerm<S> vp_pair_term(const Points29<S>& pts, const std::array<int, 4>& q1,
                           const std::array<int, 4>& q2, Points29<S>* grad) {
  VpPairTerm<S> out;
  const std::array<std::array<int, 2>, 4> lines{{{q1[0], q1[1]}, {q1[2], q1[3]},
                                                 {q2[0], q2[1]}, {q2[2], q2[3]}}};
  std::array<Vec3<S>, 4> hpt1, hpt2, l;
  for (int i = 0; i < 4; ++i) {
    const Vec2<S> a = pts.col(lines[size_t(i)][0]);
    const Vec2<S> b = pts.col(lines[size_t(i)][1]);
    if ((a - b).squaredNorm() < S(kCoincidentEps) * S(kCoincidentEps)) {
      out.value = S(kDegeneratePenalty);
      out.degenerate = true;
      return out;
    }
    hpt1[size_t(i)] = Vec3<S>(a.x(), a.y(), S(1));
    hpt2[size_t(i)] = Vec3<S>(b.x(), b.y(), S(1));
    l[size_t(i)] = hpt1[size_t(i)].cross(hpt2[size_t(i)]);
  }
  const Vec3<S> u1 = l[0].cross(l[1]);
  const Vec3<S> u2 = l[2].cross(l[3]);
  if (u1.squaredNorm() < S(1e-30) || u2.squaredNorm() < S(1e-30)) {
    out.value = S(kDegeneratePenalty);  // identical lines in a pair
    out.degenerate = true;
    return out;
  }

  const S m1 = u1.template head<2>().norm();
  const S m2 = u2.template head<2>().norm();
  const S kappa1 = std::abs(u1.z()) / std::max(m1, S(1e-300));
  const S kappa2 = std::abs(u2.z()) / std::max(m2, S(1e-300));

  Vec3<S> gu1 = Vec3<S>::Zero();
  Vec3<S> gu2 = Vec3<S>::Zero();
  if (std::min(kappa1, kappa2) < S(kParallelKappa)) {
    // Far vanishing points: compare the directions of the two intersections.
    const S th1 = std::atan2(u1.y(), u1.x());
    const S th2 = std::atan2(u2.y(), u2.x());
    const S d = fold_half_pi(th1 - th2);
    out.value = d * d;
    if (grad) {
      gu1 = S(2) * d * Vec3<S>(-u1.y(), u1.x(), S(0)) / (m1 * m1);
      gu2 = S(-2) * d * Vec3<S>(-u2.y(), u2.x(), S(0)) / (m2 * m2);
    }
  } else {
    const Vec2<S> v1 = u1.template head<2>() / u1.z();
    const Vec2<S> v2 = u2.template head<2>() / u2.z();
    const Vec2<S> diff = v1 - v2;
    const S d = diff.norm();
    Vec2<S> gv1;
    if (d <= S(kHuberDelta)) {
      out.value = S(0.5) * d * d;
      gv1 = diff;
    } else {
      out.value = S(kHuberDelta) * (d - S(0.5) * S(kHuberDelta));
      gv1 = S(kHuberDelta) * diff / d;
    }
    if (grad) {
      const auto dehom_grad = [](const Vec3<S>& u, const Vec2<S>& gv) {
        return Vec3<S>(gv.x() / u.z(), gv.y() / u.z(),
                       -(u.x() * gv.x() + u.y() * gv.y()) / (u.z() * u.z()));
      };
      gu1 = dehom_grad(u1, gv1);
      gu2 = dehom_grad(u2, Vec2<S>(-gv1));
    }
  }

  if (grad) {
    const std::array<Vec3<S>, 4> gl{l[1].cross(gu1), gu1.cross(l[0]),
                                    l[3].cross(gu2), gu2.cross(l[2])};
    for (int i = 0; i < 4; ++i) {
      const Vec3<S> ga = hpt2[size_t(i)].cross(gl[size_t(i)]);
      const Vec3<S> gb = gl[size_t(i)].cross(hpt1[size_t(i)]);
      grad->col(lines[size_t(i)][0]) += ga.template head<2>();
      grad->col(lines[size_t(i)][1]) += gb.template head<2>();
    }
  }
  return out;
}

}  // namespace detail

template <typename S> struct PerspectiveLoss {
  S d1{}, d2{}, grav{};
  Points29<S> grad_d1{Points29<S>::Zero()};
  Points29<S> grad_d2{Points29<S>::Zero()};
  Points29<S> grad_grav{Points29<S>::Zero()};

  S sum() const { return d1 + d2 + grav; }
  S weighted(const LossWeights& w) const {
    return S(w.d1) * d1 + S(w.d2) * d2 + S(w.grav) * grav;
  }
  Points29<S> weighted_grad(const LossWeights& w) const {
    return S(w.d1) * grad_d1 + S(w.d2) * grad_d2 + S(w.grav) * grad_grav;
  }
};

/// The perspective-consistency penalties of a 9-point set. d1 and d2 measure
/// the disagreement of the two vanishing-point estimates in the two
/// horizontal edge directions; grav is the variance of the vertical-edge
/// direction angles. Corner labels follow the convention order a..h.
template <typename S>
PerspectiveLoss<S> loss_perspective(const Points29<S>& pts, bool want_grad = true) {
  PerspectiveLoss<S> out;
  constexpr int a = 1, b = 2, c = 3, d = 4, e = 5, f = 6, g = 7, h = 8;

  const auto term1 =
      detail::vp_pair_term(pts, {a, d, e, h}, {b, c, f, g}, want_grad ? &out.grad_d1 : nullptr);
  out.d1 = term1.value;
  const auto term2 =
      detail::vp_pair_term(pts, {a, b, e, f}, {d, c, h, g}, want_grad ? &out.grad_d2 : nullptr);
  out.d2 = term2.value;

  // Vertical edges bottom -> top: (a,e), (b,f), (c,g), (d,h).
  const std::array<std::array<int, 2>, 4> edges{{{a, e}, {b, f}, {c, g}, {d, h}}};
  std::array<S, 4> theta{};
  std::array<Vec2<S>, 4> delta{};
  bool edge_degenerate = false;
  for (int i = 0; i < 4; ++i) {
    delta[size_t(i)] = pts.col(edges[size_t(i)][1]) - pts.col(edges[size_t(i)][0]);
    if (delta[size_t(i)].squaredNorm() < S(1e-24)) edge_degenerate = true;
    theta[size_t(i)] = std::atan2(delta[size_t(i)].y(), delta[size_t(i)].x());
  }
  if (edge_degenerate) {
    out.grav = S(kDegeneratePenalty);
    return out;
  }
  // Fold about the circular mean of the doubled angles so near-vertical
  // edges never straddle the fold boundary. The mean drops out of the
  // gradient because the deviations are centered.
  S c2 = S(0), s2 = S(0);
  for (int i = 0; i < 4; ++i) {
    c2 += std::cos(S(2) * theta[size_t(i)]);
    s2 += std::sin(S(2) * theta[size_t(i)]);
  }
  const S mu = (c2 * c2 + s2 * s2 > S(1e-30)) ? S(0.5) * std::atan2(s2, c2) : S(0);
  std::array<S, 4> dev{};
  S mean_dev = S(0);
  for (int i = 0; i < 4; ++i) {
    dev[size_t(i)] = fold_half_pi(theta[size_t(i)] - mu);
    mean_dev += dev[size_t(i)];
  }
  mean_dev /= S(4);
  S var = S(0);
  for (int i = 0; i < 4; ++i) {
    const S z = dev[size_t(i)] - mean_dev;
    var += z * z;
  }
  out.grav = var / S(4);
  if (want_grad) {
    for (int i = 0; i < 4; ++i) {
      const S gtheta = (S(2) / S(4)) * (dev[size_t(i)] - mean_dev);
      const S r2 = delta[size_t(i)].squaredNorm();
      const Vec2<S> gdelta(-gtheta * delta[size_t(i)].y() / r2,
                           gtheta * delta[size_t(i)].x() / r2);
      out.grad_grav.col(edges[size_t(i)][1]) += gdelta;
      out.grad_grav.col(edges[size_t(i)][0]) -= gdelta;
    }
  }
  return out;
}

template <typename S>
PerspectiveLoss<S> loss_perspective(const PerspectivePointsT<S>& pts, bool want_grad = true) {
  return loss_perspective(pts.points, want_grad);
}

template <typename S> using Grad5 = Eigen::Matrix<S, 5, 1>;  // [distance, w, l, h, yaw]

template <typename S> struct Loss3D {
  S dis{}, size{}, ori{}, box3d{};
  Grad5<S> grad_dis{Grad5<S>::Zero()};
  Grad5<S> grad_size{Grad5<S>::Zero()};
  Grad5<S> grad_ori{Grad5<S>::Zero()};
  Grad5<S> grad_box3d{Grad5<S>::Zero()};

  S sum() const { return dis + size + ori + box3d; }
  S weighted(const LossWeights& w) const {
    return S(w.dis) * dis + S(w.size) * size + S(w.ori) * ori + S(w.box3d) * box3d;
  }
};

/// Attribute losses plus the joint corner loss between the boxes composed
/// from the shared projected center. The corner loss takes the smaller of
/// the two index pairings related by a half-turn of the plan rectangle, so
/// a yaw error of pi on a box that maps onto itself scores zero.
template <typename S>
Loss3D<S> loss_3d(const Attrs3DT<S>& pred, const Attrs3DT<S>& gt, const CameraT<S>& cam,
                  const Vec2<S>& center2d) {
  Loss3D<S> out;

  const S ddist = pred.distance - gt.distance;
  out.dis = ddist * ddist;
  out.grad_dis[0] = S(2) * ddist;

  const Vec3<S> dsize = pred.size - gt.size;
  out.size = dsize.squaredNorm() / S(3);
  out.grad_size.template segment<3>(1) = (S(2) / S(3)) * dsize;

  const S sp = std::sin(pred.yaw), cp = std::cos(pred.yaw);
  const S sg = std::sin(gt.yaw), cg = std::cos(gt.yaw);
  out.ori = (sp - sg) * (sp - sg) + (cp - cg) * (cp - cg);
  out.grad_ori[4] = S(2) * (sp - sg) * cp - S(2) * (cp - cg) * sp;

  Mat3<S> jac_uvd;
  back_project(cam, center2d, pred.distance, &jac_uvd);
  const Vec3<S> ray = jac_uvd.col(2);  // unit viewing direction, world frame
  const Box3DT<S> box_pred{back_project(cam, center2d, pred.distance), pred.size, pred.yaw};
  const Box3DT<S> box_gt{back_project(cam, center2d, gt.distance), gt.size, gt.yaw};
  const Corners38<S> cp8 = corners(box_pred);
  const Corners38<S> cg8 = corners(box_gt);

  constexpr std::array<int, 8> ident{0, 1, 2, 3, 4, 5, 6, 7};
  constexpr std::array<int, 8> half_turn{2, 3, 0, 1, 6, 7, 4, 5};
  const auto mse_for = [&](const std::array<int, 8>& perm) {
    S acc = S(0);
    for (int i = 0; i < 8; ++i) {
      acc += (cp8.col(perm[size_t(i)]) - cg8.col(i)).squaredNorm();
    }
    return acc / S(8);
  };
  const S mse_id = mse_for(ident);
  const S mse_ht = mse_for(half_turn);
  const std::array<int, 8>& perm = (mse_ht < mse_id) ? half_turn : ident;
  out.box3d = std::min(mse_id, mse_ht);

  const Mat3<S> rotz = yaw_rotation(pred.yaw);
  const Mat3<S> drotz = yaw_rotation_deriv(pred.yaw);
  for (int i = 0; i < 8; ++i) {
    const int pi = perm[size_t(i)];
    const Vec3<S> diff = cp8.col(pi) - cg8.col(i);
    out.grad_box3d[0] += (S(2) / S(8)) * diff.dot(ray);
    for (int j = 0; j < 3; ++j) {
      out.grad_box3d[1 + j] +=
          (S(2) / S(8)) * diff.dot(rotz.col(j)) * S(kCornerSigns[size_t(pi)][size_t(j)]) * S(0.5);
    }
    const Vec3<S> local(S(kCornerSigns[size_t(pi)][0]) * pred.size.x() * S(0.5),
                        S(kCornerSigns[size_t(pi)][1]) * pred.size.y() * S(0.5),
                        S(kCornerSigns[size_t(pi)][2]) * pred.size.z() * S(0.5));
    out.grad_box3d[4] += (S(2) / S(8)) * diff.dot(drotz * local);
  }
  return out;
}

/// Free parameters of a detected box: projected center in pixels plus the 3D
/// attributes. Vector order is [u, v, distance, w, l, h, yaw].
template <typename S> struct BoxParamsT {
  Vec2<S> center2d{Vec2<S>::Zero()};
  S distance{S(1)};
  Vec3<S> size{Vec3<S>::Ones()};
  S yaw{};

  Eigen::Matrix<S, 7, 1> to_vector() const {
    Eigen::Matrix<S, 7, 1> v;
    v << center2d.x(), center2d.y(), distance, size.x(), size.y(), size.z(), yaw;
    return v;
  }
  static BoxParamsT from_vector(const Eigen::Matrix<S, 7, 1>& v) {
    BoxParamsT p;
    p.center2d = Vec2<S>(v[0], v[1]);
    p.distance = v[2];
    p.size = Vec3<S>(v[3], v[4], v[5]);
    p.yaw = v[6];
    return p;
  }
  Attrs3DT<S> attrs() const { return Attrs3DT<S>{distance, size, yaw}; }
  Box3DT<S> box(const CameraT<S>& cam) const {
    return compose_box(center2d, distance, size, yaw, cam);
  }
};

using BoxParams = BoxParamsT<double>;

template <typename S> using Grad7 = Eigen::Matrix<S, 7, 1>;
template <typename S> using ProjJacobian = Eigen::Matrix<S, 18, 7>;  // rows: 2*point + coord

/// Exact normalized projection of the parameterized box, with the full
/// jacobian of the 18 coordinates in the 7 parameters when requested.
template <typename S>
Points29<S> project_box_points(const BoxParamsT<S>& bp, const CameraT<S>& cam,
                               const RoIT<S>& roi, ProjJacobian<S>* jac = nullptr) {
  Mat3<S> dcenter;
  const Vec3<S> center_w =
      back_project(cam, bp.center2d, bp.distance, jac ? &dcenter : nullptr);
  const Mat3<S> rotz = yaw_rotation(bp.yaw);
  const Mat3<S> drotz = yaw_rotation_deriv(bp.yaw);
  const RoIT<S> e = extended_roi(roi);
  const Vec2<S> inv_ext(S(1) / e.width(), S(1) / e.height());

  Points29<S> out;
  for (int k = 0; k < 9; ++k) {
    Vec3<S> local = Vec3<S>::Zero();
    if (k > 0) {
      const auto& sg = kCornerSigns[size_t(k - 1)];
      local = Vec3<S>(S(sg[0]) * bp.size.x() * S(0.5), S(sg[1]) * bp.size.y() * S(0.5),
                      S(sg[2]) * bp.size.z() * S(0.5));
    }
    const Vec3<S> world = (k == 0) ? center_w : Vec3<S>(center_w + rotz * local);
    Eigen::Matrix<S, 2, 3> jw;
    const Vec2<S> px = project_point(cam, world, jac ? &jw : nullptr);
    out.col(k) = Vec2<S>((px.x() - e.x0) * inv_ext.x(), (px.y() - e.y0) * inv_ext.y());
    if (jac) {
      Eigen::Matrix<S, 3, 7> dworld = Eigen::Matrix<S, 3, 7>::Zero();
      dworld.template block<3, 3>(0, 0) = dcenter;
      if (k > 0) {
        const auto& sg = kCornerSigns[size_t(k - 1)];
        for (int j = 0; j < 3; ++j) {
          dworld.col(3 + j) = rotz.col(j) * (S(sg[size_t(j)]) * S(0.5));
        }
        dworld.col(6) = drotz * local;
      }
      jac->template block<2, 7>(2 * k, 0) = inv_ext.asDiagonal() * (jw * dworld);
    }
  }
  return out;
}

template <typename S> struct ProjLoss {
  S value{};
  Grad7<S> grad{Grad7<S>::Zero()};
};

/// Reprojection-consistency loss: MSE between the exact projection of the
/// parameterized box and the target points, with gradient in the box
/// parameters.
template <typename S>
ProjLoss<S> loss_proj(const BoxParamsT<S>& bp, const CameraT<S>& cam, const RoIT<S>& roi,
                      const PerspectivePointsT<S>& gt) {
  ProjJacobian<S> jac;
  const Points29<S> pred = project_box_points(bp, cam, roi, &jac);
  const ValueGrad29<S> lp = loss_pp(pred, gt.points);
  ProjLoss<S> out;
  out.value = lp.value;
  out.grad = jac.transpose() * Eigen::Map<const Eigen::Matrix<S, 18, 1>>(lp.grad.data());
  return out;
}

/// Full breakdown of the joint objective for one proposal. The box behind
/// the 3D and consistency terms is composed about the predicted projected
/// center (point 0 of pred_pp).
inline LossBreakdown total_loss(const PerspectivePoints& pred_pp, const PerspectivePoints& gt_pp,
                                const Attrs3D& pred, const Attrs3D& gt, const Camera& cam,
                                const RoI& roi, const LossWeights& w, Phase phase) {
  LossBreakdown b;
  b.pp = loss_pp(pred_pp, gt_pp).value;

  const PerspectiveLoss<double> pl = loss_perspective(pred_pp, false);
  b.d1 = pl.d1;
  b.d2 = pl.d2;
  b.grav = pl.grav;
  b.p = pl.weighted(w);

  const Vec2<double> center2d = denormalize_pixel(Vec2<double>(pred_pp.points.col(0)), roi);
  const Loss3D<double> l3 = loss_3d(pred, gt, cam, center2d);
  b.dis = l3.dis;
  b.size = l3.size;
  b.ori = l3.ori;
  b.box3d = l3.box3d;
  b.l3d = l3.weighted(w);

  BoxParams bp{center2d, pred.distance, pred.size, pred.yaw};
  b.proj = loss_proj(bp, cam, roi, gt_pp).value;

  b.total = weighted_total(b.pp, b.p, b.l3d, b.proj, w, phase);
  return b;
}

}  // namespace persp3d
