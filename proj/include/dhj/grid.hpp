#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "dhj/core.hpp"

namespace dhj {

enum class Interpolation { Multilinear, Cubic };

/// Uniform rectangular grid specification, one entry per state axis.
template <typename Scalar = double>
struct GridSpec {
  struct Axis {
    Scalar lo;
    Scalar hi;
    int points;
  };
  std::vector<Axis> axes;

  Eigen::Index dim() const { return Eigen::Index(axes.size()); }

  void validate(Interpolation order = Interpolation::Multilinear) const {
    if (axes.empty()) throw InvalidArgument("GridSpec: at least one axis required");
    const int min_points = order == Interpolation::Cubic ? 4 : 2;
    for (size_t i = 0; i < axes.size(); ++i) {
      if (!(axes[i].hi > axes[i].lo))
        throw InvalidArgument("GridSpec: axis " + std::to_string(i) + " has hi <= lo");
      if (axes[i].points < min_points)
        throw InvalidArgument("GridSpec: axis " + std::to_string(i) + " needs at least " +
                              std::to_string(min_points) + " points");
    }
  }

  Scalar spacing(size_t axis) const {
    return (axes[axis].hi - axes[axis].lo) / Scalar(axes[axis].points - 1);
  }

  size_t node_count() const {
    size_t n = 1;
    for (const auto& a : axes) n *= size_t(a.points);
    return n;
  }

  /// Flat index of a multi-index (axis 0 slowest).
  size_t flat_index(const std::vector<int>& idx) const {
    size_t flat = 0;
    for (size_t a = 0; a < axes.size(); ++a) flat = flat * size_t(axes[a].points) + size_t(idx[a]);
    return flat;
  }

  std::vector<int> multi_index(size_t flat) const {
    std::vector<int> idx(axes.size());
    for (size_t a = axes.size(); a-- > 0;) {
      idx[a] = int(flat % size_t(axes[a].points));
      flat /= size_t(axes[a].points);
    }
    return idx;
  }

  VectorX<Scalar> node(const std::vector<int>& idx) const {
    VectorX<Scalar> q(Eigen::Index(axes.size()));
    for (size_t a = 0; a < axes.size(); ++a) q(Eigen::Index(a)) = axes[a].lo + spacing(a) * idx[a];
    return q;
  }

  /// True if q lies within the domain extended by `margin` times each axis
  /// range on both sides.
  bool within_margin(const VectorX<Scalar>& q, Scalar margin) const {
    for (size_t a = 0; a < axes.size(); ++a) {
      const Scalar range = axes[a].hi - axes[a].lo;
      if (q(Eigen::Index(a)) < axes[a].lo - margin * range ||
          q(Eigen::Index(a)) > axes[a].hi + margin * range)
        return false;
    }
    return true;
  }

  VectorX<Scalar> clamp(VectorX<Scalar> q) const {
    for (size_t a = 0; a < axes.size(); ++a)
      q(Eigen::Index(a)) = std::min(axes[a].hi, std::max(axes[a].lo, q(Eigen::Index(a))));
    return q;
  }
};

using GridSpecd = GridSpec<double>;

namespace detail {

// Catmull-Rom segment value with node values y[-1..2] and parameter t in [0,1].
// Tangents are centered differences, which reproduces quadratics exactly.
template <typename Scalar>
Scalar catmull_rom(Scalar ym1, Scalar y0, Scalar y1, Scalar y2, Scalar t) {
  const Scalar m0 = (y1 - ym1) / Scalar(2);
  const Scalar m1 = (y2 - y0) / Scalar(2);
  const Scalar t2 = t * t;
  const Scalar t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
         (t3 - t2) * m1;
}

// Value at signed index, with quadratic ghost extrapolation one node past
// either end (exact for quadratic data).
template <typename Scalar, typename Fetch>
Scalar fetch_with_ghost(const Fetch& fetch, int i, int points) {
  if (i >= 0 && i < points) return fetch(i);
  if (i == -1) return 3 * fetch(0) - 3 * fetch(1) + fetch(2);
  return 3 * fetch(points - 1) - 3 * fetch(points - 2) + fetch(points - 3);
}

// Recursive tensor-product interpolation along axis `a`.
template <typename Scalar>
Scalar interpolate_rec(const GridSpec<Scalar>& spec, const std::vector<Scalar>& data,
                       const VectorX<Scalar>& q, size_t a, size_t offset, Interpolation order) {
  const size_t dims = spec.axes.size();
  const int points = spec.axes[a].points;
  const Scalar d = spec.spacing(a);
  Scalar x = (q(Eigen::Index(a)) - spec.axes[a].lo) / d;
  x = std::min(Scalar(points - 1), std::max(Scalar(0), x));
  int cell = int(x);
  if (cell >= points - 1) cell = points - 2;
  const Scalar t = x - Scalar(cell);

  size_t stride = 1;
  for (size_t b = dims; b-- > a + 1;) stride *= size_t(spec.axes[b].points);

  auto fetch = [&](int i) -> Scalar {
    const size_t off = offset + size_t(i) * stride;
    if (a + 1 == dims) return data[off];
    // Lower axes vary within the sub-block starting at off.
    return interpolate_rec(spec, data, q, a + 1, off, order);
  };

  if (order == Interpolation::Multilinear) {
    const Scalar y0 = fetch(cell);
    const Scalar y1 = fetch(cell + 1);
    return (1 - t) * y0 + t * y1;
  }
  const Scalar ym1 = fetch_with_ghost<Scalar>(fetch, cell - 1, points);
  const Scalar y0 = fetch(cell);
  const Scalar y1 = fetch(cell + 1);
  const Scalar y2 = fetch_with_ghost<Scalar>(fetch, cell + 2, points);
  return catmull_rom(ym1, y0, y1, y2, t);
}

}  // namespace detail

/// Interpolates flattened node data at q, clamping q to the grid domain.
template <typename Scalar>
Scalar interpolate(const GridSpec<Scalar>& spec, const std::vector<Scalar>& data,
                   const VectorX<Scalar>& q, Interpolation order = Interpolation::Multilinear) {
  if (q.size() != spec.dim()) throw InvalidArgument("interpolate: dimension mismatch");
  if (data.size() != spec.node_count()) throw InvalidArgument("interpolate: data size mismatch");
  return detail::interpolate_rec(spec, data, spec.clamp(q), 0, 0, order);
}

}  // namespace dhj
