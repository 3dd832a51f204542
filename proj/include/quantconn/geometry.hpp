#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

namespace qc {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box, closed.
template <int D>
struct Box {
  Vec<D> lo, hi;

  double side(int axis) const { return hi[axis] - lo[axis]; }
  Vec<D> center() const { return 0.5 * (lo + hi); }
  double diam() const { return (hi - lo).norm(); }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < D; ++a) v *= side(a);
    return v;
  }
  bool contains(const Vec<D>& x) const {
    for (int a = 0; a < D; ++a)
      if (x[a] < lo[a] || x[a] > hi[a]) return false;
    return true;
  }
  /// Distance from x to the box (0 if inside).
  double dist(const Vec<D>& x) const {
    double s = 0.0;
    for (int a = 0; a < D; ++a) {
      double d = std::max({lo[a] - x[a], 0.0, x[a] - hi[a]});
      s += d * d;
    }
    return std::sqrt(s);
  }
  /// Largest distance from x to a point of the box.
  double far_dist(const Vec<D>& x) const {
    double s = 0.0;
    for (int a = 0; a < D; ++a) {
      double d = std::max(std::abs(x[a] - lo[a]), std::abs(x[a] - hi[a]));
      s += d * d;
    }
    return std::sqrt(s);
  }
  /// Concentric dilation by factor f.
  Box dilated(double f) const {
    Vec<D> c = center(), h = 0.5 * f * (hi - lo);
    return {c - h, c + h};
  }
  bool intersects(const Box& o) const {
    for (int a = 0; a < D; ++a)
      if (hi[a] < o.lo[a] || o.hi[a] < lo[a]) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Point/segment primitives (2D).
// ---------------------------------------------------------------------------

inline Vec<2> closest_point_segment(const Vec<2>& x, const Vec<2>& a, const Vec<2>& b) {
  Vec<2> u = b - a;
  double uu = u.squaredNorm();
  double t = uu > 0 ? std::clamp((x - a).dot(u) / uu, 0.0, 1.0) : 0.0;
  return a + t * u;
}

inline double dist_point_segment(const Vec<2>& x, const Vec<2>& a, const Vec<2>& b) {
  return (x - closest_point_segment(x, a, b)).norm();
}

/// Distance from x to the circle |y-o| = R (the curve, not the disk).
inline double dist_point_circle(const Vec<2>& x, const Vec<2>& o, double R) {
  return std::abs((x - o).norm() - R);
}

inline Vec<2> closest_point_circle(const Vec<2>& x, const Vec<2>& o, double R) {
  Vec<2> v = x - o;
  double n = v.norm();
  if (n < 1e-300) return o + R * Vec<2>(1, 0);
  return o + (R / n) * v;
}

/// Liang-Barsky segment/box overlap test.
inline bool segment_intersects_box(const Vec<2>& a, const Vec<2>& b, const Box<2>& box) {
  double t0 = 0.0, t1 = 1.0;
  Vec<2> d = b - a;
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-300) {
      if (a[ax] < box.lo[ax] || a[ax] > box.hi[ax]) return false;
    } else {
      double u0 = (box.lo[ax] - a[ax]) / d[ax];
      double u1 = (box.hi[ax] - a[ax]) / d[ax];
      if (u0 > u1) std::swap(u0, u1);
      t0 = std::max(t0, u0);
      t1 = std::min(t1, u1);
      if (t0 > t1) return false;
    }
  }
  return true;
}

/// Exact distance between an axis box and a segment.  Both sets are convex
/// polytopes, so the minimum is attained vertex-against-set.
inline double dist_box_segment(const Box<2>& box, const Vec<2>& a, const Vec<2>& b) {
  if (segment_intersects_box(a, b, box)) return 0.0;
  double best = std::min(box.dist(a), box.dist(b));
  const Vec<2> corners[4] = {box.lo, {box.hi[0], box.lo[1]}, {box.lo[0], box.hi[1]}, box.hi};
  for (const auto& c : corners) best = std::min(best, dist_point_segment(c, a, b));
  return best;
}

/// Exact distance between an axis box and the circle |y-o| = R.  The distance
/// function |x-o| is continuous on the connected box, so the circle meets the
/// box iff R lies between the min and max of |x-o| over the box.
inline double dist_box_circle(const Box<2>& box, const Vec<2>& o, double R) {
  double dmin = box.dist(o);
  double dmax = box.far_dist(o);
  if (dmin <= R && R <= dmax) return 0.0;
  return R < dmin ? dmin - R : R - dmax;
}

/// Distance from the interval [a,b] to the lattice c*Z.
inline double dist_interval_lattice(double a, double b, double c) {
  if (std::floor(b / c) >= std::ceil(a / c)) return 0.0;
  double m = std::min(a - std::floor(a / c) * c, std::ceil(b / c) * c - b);
  return std::max(m, 0.0);
}

// ---------------------------------------------------------------------------
// Uniform spatial hash for nearest-point queries over a fixed point cloud.
// ---------------------------------------------------------------------------

template <int D>
class SpatialGrid {
 public:
  SpatialGrid() = default;

  void build(const std::vector<Vec<D>>& pts, double cell) {
    pts_ = &pts;
    cell_ = std::max(cell, 1e-300);
    cells_.clear();
    max_ring_ = 2;
    if (pts.empty()) return;
    Vec<D> lo = pts[0], hi = pts[0];
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
      cells_[cell_key(coords(pts[i]))].push_back(i);
      lo = lo.cwiseMin(pts[i]);
      hi = hi.cwiseMax(pts[i]);
    }
    max_ring_ = 3 + static_cast<int64_t>((hi - lo).template lpNorm<Eigen::Infinity>() / cell_);
  }

  bool empty() const { return !pts_ || cells_.empty(); }

  /// Registers point i (must already be in the backing vector).  The ring
  /// bound for nearest() is not updated; for_each_within stays exact.
  void insert(int i) { cells_[cell_key(coords((*pts_)[i]))].push_back(i); }

  /// Index of the nearest point; ties broken by smallest index.
  int nearest(const Vec<D>& x) const {
    return nearest_if(x, [](int) { return true; });
  }

  /// Nearest point satisfying the predicate, or -1.
  template <typename P>
  int nearest_if(const Vec<D>& x, P&& pred) const {
    int best = -1;
    double best_d = kInf;
    if (empty()) return -1;
    // Cells on L-inf ring r hold points at distance >= (r-1)*cell.
    for (int64_t ring = 0; ring <= max_ring_ + 1; ++ring) {
      if (best >= 0 && static_cast<double>(ring - 1) * cell_ > best_d) break;
      visit_shell(x, ring, [&](int i) {
        if (!pred(i)) return;
        double d = ((*pts_)[i] - x).norm();
        if (d < best_d || (d == best_d && i < best)) {
          best_d = d;
          best = i;
        }
      });
    }
    return best;
  }

  double nearest_dist(const Vec<D>& x) const {
    int i = nearest(x);
    return i < 0 ? kInf : ((*pts_)[i] - x).norm();
  }

  /// Visits every point within Euclidean distance r of x.
  template <typename F>
  void for_each_within(const Vec<D>& x, double r, F&& f) const {
    if (empty()) return;
    Cell c0, c1;
    double boxes = 1.0;
    for (int a = 0; a < D; ++a) {
      c0[a] = static_cast<int64_t>(std::floor((x[a] - r) / cell_));
      c1[a] = static_cast<int64_t>(std::floor((x[a] + r) / cell_));
      boxes *= static_cast<double>(c1[a] - c0[a] + 1);
    }
    if (boxes > static_cast<double>(cells_.size())) {
      // the ball spans more cells than exist: scan the occupied cells
      for (const auto& [key, ids] : cells_) {
        (void)key;
        for (int i : ids)
          if (((*pts_)[i] - x).norm() <= r) f(i);
      }
      return;
    }
    for_cells(c0, c1, [&](const Cell& c) {
      auto it = cells_.find(cell_key(c));
      if (it == cells_.end()) return;
      for (int i : it->second)
        if (((*pts_)[i] - x).norm() <= r) f(i);
    });
  }

 private:
  using Cell = Eigen::Matrix<int64_t, D, 1>;

  Cell coords(const Vec<D>& x) const {
    Cell c;
    for (int a = 0; a < D; ++a) c[a] = static_cast<int64_t>(std::floor(x[a] / cell_));
    return c;
  }
  static uint64_t cell_key(const Cell& c) {
    uint64_t h = 1469598103934665603ull;
    for (int a = 0; a < D; ++a) {
      h = (h ^ static_cast<uint64_t>(c[a])) * 1099511628211ull;
      h ^= h >> 29;
    }
    return h;
  }
  template <typename F>
  static void for_cells(const Cell& c0, const Cell& c1, F&& f) {
    Cell c = c0;
    while (true) {
      f(c);
      int a = 0;
      for (; a < D; ++a) {
        if (++c[a] <= c1[a]) break;
        c[a] = c0[a];
      }
      if (a == D) break;
    }
  }
  // Visits exactly the cells on the L-inf shell of the given radius: each
  // shell cell is charged to the smallest axis attaining the radius.
  template <typename F>
  void visit_shell(const Vec<D>& x, int64_t ring, F&& f) const {
    Cell base = coords(x);
    auto visit_cell = [&](const Cell& c) {
      auto it = cells_.find(cell_key(c));
      if (it == cells_.end()) return;
      for (int i : it->second) f(i);
    };
    if (ring == 0) {
      visit_cell(base);
      return;
    }
    for (int pin = 0; pin < D; ++pin) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        Cell lo, hi;
        bool empty_face = false;
        for (int a = 0; a < D; ++a) {
          if (a == pin) {
            lo[a] = hi[a] = base[a] + sgn * ring;
          } else {
            int64_t span = a < pin ? ring - 1 : ring;
            lo[a] = base[a] - span;
            hi[a] = base[a] + span;
            if (hi[a] < lo[a]) empty_face = true;
          }
        }
        if (empty_face) continue;
        for_cells(lo, hi, visit_cell);
      }
    }
  }

  const std::vector<Vec<D>>* pts_ = nullptr;
  double cell_ = 1.0;
  int64_t max_ring_ = 2;
  std::unordered_map<uint64_t, std::vector<int>> cells_;
};

}  // namespace qc
