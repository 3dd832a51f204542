#include "quantconn/domain.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>

namespace qc {
namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

uint64_t splitmix64(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
double unit_double(uint64_t& s) { return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53; }

/// Arc length of {y : |y| = R} ∩ B(c, r).
double circle_ball_arc(const Vec<2>& c, double r, double R) {
  double d = c.norm();
  if (d < 1e-14) return r >= R ? 2 * kPi * R : 0.0;
  double t = (d * d + R * R - r * r) / (2 * d * R);
  if (t <= -1) return 2 * kPi * R;
  if (t >= 1) return 0.0;
  return 2 * R * std::acos(t);
}

/// Length of segment [a,b] ∩ B(c, r).
double segment_ball_length(const Vec<2>& a, const Vec<2>& b, const Vec<2>& c, double r) {
  Vec<2> u = b - a;
  double uu = u.squaredNorm();
  if (uu < 1e-300) return 0.0;
  double bq = u.dot(a - c), cq = (a - c).squaredNorm() - r * r;
  double disc = bq * bq - uu * cq;
  if (disc <= 0) return 0.0;
  double sq = std::sqrt(disc);
  double t0 = std::max(0.0, (-bq - sq) / uu), t1 = std::min(1.0, (-bq + sq) / uu);
  return t1 > t0 ? (t1 - t0) * std::sqrt(uu) : 0.0;
}

/// Area of the intersection of two disks.
double disk_disk_area(double r1, double r2, double d) {
  if (d >= r1 + r2) return 0.0;
  double rmin = std::min(r1, r2);
  if (d <= std::abs(r1 - r2)) return kPi * rmin * rmin;
  double a1 = r1 * r1 * std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2 * d * r1), -1.0, 1.0));
  double a2 = r2 * r2 * std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2 * d * r2), -1.0, 1.0));
  double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
  return a1 + a2 - 0.5 * std::sqrt(std::max(k, 0.0));
}

double dist_point_square_boundary(const Vec<2>& p, const Vec<2>& lo, double L) {
  Box<2> b{lo, lo + Vec<2>(L, L)};
  double outside = b.dist(p);
  if (outside > 0) return outside;
  double m = kInf;
  for (int a = 0; a < 2; ++a) m = std::min({m, p[a] - b.lo[a], b.hi[a] - p[a]});
  return m;
}

// ---------------------------------------------------------------------------
// disk
// ---------------------------------------------------------------------------

class DiskDomain final : public DomainImpl<2> {
 public:
  DiskDomain() { patches_ = {{"circle", 2 * kPi}}; }
  std::string tag() const override { return "disk"; }
  Box<2> bbox() const override { return {{-1.25, -1.25}, {1.25, 1.25}}; }
  double distance(const Vec<2>& x) const override { return std::abs(x.norm() - 1.0); }
  bool inside(const Vec<2>& x) const override { return x.norm() < 1.0; }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    return {closest_point_circle(x, {0, 0}, 1.0), distance(x), 0};
  }
  double box_distance(const Box<2>& b) const override { return dist_box_circle(b, {0, 0}, 1.0); }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int, const double* u) const override {
    double th = 2 * kPi * u[0];
    Vec<2> p(std::cos(th), std::sin(th));
    return {p, 0.0, 0, -p};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    return circle_ball_arc(c, r, 1.0);
  }

 private:
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// slit_disk: open unit disk minus the slit [0,1] x {0}
// ---------------------------------------------------------------------------

class SlitDiskDomain final : public DomainImpl<2> {
 public:
  SlitDiskDomain() {
    // The slit carries H^1 mass 1, split between its two faces.
    patches_ = {{"circle", 2 * kPi}, {"slit_up", 0.5}, {"slit_lo", 0.5}};
  }
  std::string tag() const override { return "slit_disk"; }
  Box<2> bbox() const override { return {{-1.25, -1.25}, {1.25, 1.25}}; }
  double distance(const Vec<2>& x) const override {
    return std::min(std::abs(x.norm() - 1.0), dist_point_segment(x, {0, 0}, {1, 0}));
  }
  bool inside(const Vec<2>& x) const override {
    return x.norm() < 1.0 && dist_point_segment(x, {0, 0}, {1, 0}) > 0.0;
  }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    double dc = std::abs(x.norm() - 1.0);
    Vec<2> ps = closest_point_segment(x, {0, 0}, {1, 0});
    double ds = (x - ps).norm();
    if (dc <= ds) return {closest_point_circle(x, {0, 0}, 1.0), dc, 0};
    return {ps, ds, x[1] >= 0 ? 1 : 2};
  }
  double box_distance(const Box<2>& b) const override {
    return std::min(dist_box_circle(b, {0, 0}, 1.0), dist_box_segment(b, {0, 0}, {1, 0}));
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int patch, const double* u) const override {
    if (patch == 0) {
      double th = 2 * kPi * u[0];
      Vec<2> p(std::cos(th), std::sin(th));
      return {p, 0.0, 0, -p};
    }
    Vec<2> p(u[0], 0.0);
    Vec<2> n(0.0, patch == 1 ? 1.0 : -1.0);
    return {p, 0.0, patch, n};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    return circle_ball_arc(c, r, 1.0) + segment_ball_length({0, 0}, {1, 0}, c, r);
  }

 private:
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// cross_disk: open unit disk minus {|x|<=1/2, y=0} ∪ {x=0, |y|<=1/2}
// ---------------------------------------------------------------------------

class CrossDiskDomain final : public DomainImpl<2> {
 public:
  CrossDiskDomain() {
    patches_ = {{"circle", 2 * kPi}, {"h_up", 0.5},   {"h_lo", 0.5},
                {"v_right", 0.5},    {"v_left", 0.5}};
  }
  std::string tag() const override { return "cross_disk"; }
  Box<2> bbox() const override { return {{-1.25, -1.25}, {1.25, 1.25}}; }
  double distance(const Vec<2>& x) const override {
    return std::min({std::abs(x.norm() - 1.0), dist_point_segment(x, {-0.5, 0}, {0.5, 0}),
                     dist_point_segment(x, {0, -0.5}, {0, 0.5})});
  }
  bool inside(const Vec<2>& x) const override { return x.norm() < 1.0 && distance(x) > 0.0; }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    double dc = std::abs(x.norm() - 1.0);
    Vec<2> ph = closest_point_segment(x, {-0.5, 0}, {0.5, 0});
    Vec<2> pv = closest_point_segment(x, {0, -0.5}, {0, 0.5});
    double dh = (x - ph).norm(), dv = (x - pv).norm();
    if (dc <= dh && dc <= dv) return {closest_point_circle(x, {0, 0}, 1.0), dc, 0};
    if (dh <= dv) return {ph, dh, x[1] >= 0 ? 1 : 2};
    return {pv, dv, x[0] >= 0 ? 3 : 4};
  }
  double box_distance(const Box<2>& b) const override {
    return std::min({dist_box_circle(b, {0, 0}, 1.0), dist_box_segment(b, {-0.5, 0}, {0.5, 0}),
                     dist_box_segment(b, {0, -0.5}, {0, 0.5})});
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int patch, const double* u) const override {
    if (patch == 0) {
      double th = 2 * kPi * u[0];
      Vec<2> p(std::cos(th), std::sin(th));
      return {p, 0.0, 0, -p};
    }
    double t = u[0] - 0.5;  // arm parameter in [-1/2, 1/2)
    if (patch == 1) return {{t, 0}, 0.0, 1, {0, 1}};
    if (patch == 2) return {{t, 0}, 0.0, 2, {0, -1}};
    if (patch == 3) return {{0, t}, 0.0, 3, {1, 0}};
    return {{0, t}, 0.0, 4, {-1, 0}};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    return circle_ball_arc(c, r, 1.0) + segment_ball_length({-0.5, 0}, {0.5, 0}, c, r) +
           segment_ball_length({0, -0.5}, {0, 0.5}, c, r);
  }

 private:
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// half_space: x_D > 0, boundary hyperplane x_D = 0
// ---------------------------------------------------------------------------

template <int D>
class HalfSpaceDomain final : public DomainImpl<D> {
 public:
  HalfSpaceDomain() {
    double area = 1.0;
    for (int a = 0; a + 1 < D; ++a) area *= box_.side(a);
    patches_ = {{"floor", area}};
  }
  std::string tag() const override { return "half_space"; }
  Box<D> bbox() const override { return box_; }
  double distance(const Vec<D>& x) const override { return std::abs(x[D - 1]); }
  bool inside(const Vec<D>& x) const override { return x[D - 1] > 0.0; }
  NearestBoundary<D> nearest_boundary(const Vec<D>& x) const override {
    Vec<D> p = x;
    p[D - 1] = 0.0;
    return {p, std::abs(x[D - 1]), 0};
  }
  double box_distance(const Box<D>& b) const override {
    return std::max({b.lo[D - 1], 0.0, -b.hi[D - 1]});
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<D> sample_patch(int, const double* u) const override {
    BoundarySample<D> s;
    s.point[D - 1] = 0.0;
    if constexpr (D == 2) {
      s.point[0] = box_.lo[0] + u[0] * box_.side(0);
    } else {
      // u[0] runs over a row-major grid of floor strata.
      int n = 64;
      int idx = std::min(n * n - 1, static_cast<int>(u[0] * n * n));
      int i = idx % n, j = idx / n;
      s.point[0] = box_.lo[0] + (i + u[1]) / n * box_.side(0);
      s.point[1] = box_.lo[1] + (j + u[2]) / n * box_.side(1);
    }
    s.normal = Vec<D>::Zero();
    s.normal[D - 1] = 1.0;
    return s;
  }
  std::optional<double> surface_ball_measure(const Vec<D>& c, double r) const override {
    double h = std::abs(c[D - 1]);
    if (h >= r) return 0.0;
    double w = std::sqrt(r * r - h * h);
    return D == 2 ? 2 * w : kPi * w * w;
  }

 private:
  Box<D> box_ = [] {
    Box<D> b;
    b.lo = Vec<D>::Constant(-4.0);
    b.hi = Vec<D>::Constant(4.0);
    return b;
  }();
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// lipschitz_graph{slope}: region above a two-scale sawtooth graph
// ---------------------------------------------------------------------------

class LipschitzGraphDomain final : public DomainImpl<2> {
 public:
  explicit LipschitzGraphDomain(double slope) : slope_(slope) {
    if (!(slope >= 0.0 && slope < 1.0)) throw std::invalid_argument("lipschitz_graph: slope must be in [0,1)");
    // Breakpoints on the fine-scale grid; the coarse corners are a subset.
    // The graph formula is global, so the table extends far beyond the
    // sampling window: flatness balls at coarse scales see the true graph.
    int n = static_cast<int>(std::round((x_hi_ - x_lo_) / kStep));
    xs_.resize(n + 1);
    ys_.resize(n + 1);
    double len = 0.0;
    for (int i = 0; i <= n; ++i) {
      xs_[i] = x_lo_ + i * kStep;
      ys_[i] = height(xs_[i]);
      if (i > 0 && xs_[i - 1] >= box_.lo[0] && xs_[i] <= box_.hi[0])
        len += std::hypot(kStep, ys_[i] - ys_[i - 1]);  // window arclength
    }
    patches_ = {{"graph", len}};
    win_lo_ = index_at(box_.lo[0]);
  }
  std::string tag() const override { return "lipschitz_graph"; }
  Box<2> bbox() const override { return box_; }
  double height(double x) const {
    auto tri = [](double t) {  // period 2, slope ±1, range [0,1]
      double m = std::fmod(std::abs(t), 2.0);
      return 1.0 - std::abs(m - 1.0);
    };
    return 0.5 * slope_ * (tri(x) - 0.5) + 0.5 * slope_ * (tri(16 * x) - 0.5) / 16.0;
  }
  double distance(const Vec<2>& x) const override {
    size_t i0 = index_at(x[0]);
    double best = dist_point_segment(x, seg_a(i0), seg_b(i0));
    for (size_t j = 1; j < xs_.size(); ++j) {
      bool more = false;
      if (i0 >= j) {
        size_t i = i0 - j;
        if (x[0] - xs_[i + 1] < best) {
          best = std::min(best, dist_point_segment(x, seg_a(i), seg_b(i)));
          more = true;
        }
      }
      if (i0 + j + 1 < xs_.size()) {
        size_t i = i0 + j;
        if (xs_[i] - x[0] < best) {
          best = std::min(best, dist_point_segment(x, seg_a(i), seg_b(i)));
          more = true;
        }
      }
      if (!more) break;
    }
    return best;
  }
  bool inside(const Vec<2>& x) const override { return x[1] > height(x[0]); }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    size_t i0 = index_at(x[0]);
    double best = kInf;
    Vec<2> bp = Vec<2>::Zero();
    auto try_seg = [&](size_t i) {
      Vec<2> p = closest_point_segment(x, seg_a(i), seg_b(i));
      double d = (x - p).norm();
      if (d < best) {
        best = d;
        bp = p;
      }
    };
    try_seg(i0);
    for (size_t j = 1; j < xs_.size(); ++j) {
      bool more = false;
      if (i0 >= j && x[0] - xs_[i0 - j + 1] < best) {
        try_seg(i0 - j);
        more = true;
      }
      if (i0 + j + 1 < xs_.size() && xs_[i0 + j] - x[0] < best) {
        try_seg(i0 + j);
        more = true;
      }
      if (!more) break;
    }
    return {bp, best, 0};
  }
  double box_distance(const Box<2>& b) const override {
    size_t ilo = index_at(b.lo[0]), ihi = index_at(b.hi[0]);
    double best = kInf;
    for (size_t i = ilo; i <= ihi; ++i) best = std::min(best, dist_box_segment(b, seg_a(i), seg_b(i)));
    for (size_t j = 1; j < xs_.size(); ++j) {
      bool more = false;
      if (ilo >= j && b.lo[0] - xs_[ilo - j + 1] < best) {
        best = std::min(best, dist_box_segment(b, seg_a(ilo - j), seg_b(ilo - j)));
        more = true;
      }
      if (ihi + j + 1 < xs_.size() && xs_[ihi + j] - b.hi[0] < best) {
        best = std::min(best, dist_box_segment(b, seg_a(ihi + j), seg_b(ihi + j)));
        more = true;
      }
      if (!more) break;
    }
    return best;
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int, const double* u) const override {
    // Arclength-uniform over the window polyline.
    double target = u[0] * patches_[0].measure;
    for (size_t i = win_lo_; i + 1 < xs_.size(); ++i) {
      double l = (seg_b(i) - seg_a(i)).norm();
      if (target <= l || xs_[i + 1] >= box_.hi[0]) {
        double t = std::clamp(target / l, 0.0, 1.0);
        Vec<2> a = seg_a(i), b = seg_b(i);
        Vec<2> tang = (b - a) / l;
        return {a + t * (b - a), 0.0, 0, {-tang[1], tang[0]}};
      }
      target -= l;
    }
    return {seg_a(win_lo_), 0.0, 0, {0, 1}};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    size_t ilo = index_at(c[0] - r - 1), ihi = index_at(c[0] + r + 1);
    double s = 0.0;
    for (size_t i = ilo; i <= ihi; ++i) s += segment_ball_length(seg_a(i), seg_b(i), c, r);
    return s;
  }

 private:
  static constexpr double kStep = 1.0 / 16.0;
  size_t index_at(double x) const {
    double t = (std::clamp(x, x_lo_, x_hi_ - kStep) - x_lo_) / kStep;
    return static_cast<size_t>(std::clamp<long>(static_cast<long>(t), 0,
                                                static_cast<long>(xs_.size()) - 2));
  }
  Vec<2> seg_a(size_t i) const { return {xs_[i], ys_[i]}; }
  Vec<2> seg_b(size_t i) const { return {xs_[i + 1], ys_[i + 1]}; }

  double slope_;
  double x_lo_ = -130.0, x_hi_ = 130.0;
  Box<2> box_{{-2, -2}, {2, 2}};
  std::vector<double> xs_, ys_;
  std::vector<PatchInfo> patches_;
  size_t win_lo_ = 0;
};

// ---------------------------------------------------------------------------
// four_corners{k_max}: Garnett 4-corners stages, block k at (2k, 0)
// ---------------------------------------------------------------------------

class FourCornersDomain final : public DomainImpl<2> {
 public:
  explicit FourCornersDomain(int k_max) : k_max_(k_max) {
    if (k_max < 0 || k_max > 12) throw std::invalid_argument("four_corners: k_max must be in [0,12]");
    for (int k = 0; k <= k_max; ++k) patches_.push_back({"block" + std::to_string(k), 4.0});
  }
  std::string tag() const override { return "four_corners"; }
  Box<2> bbox() const override { return {{-0.5, -0.5}, {2.0 * k_max_ + 1.5, 1.5}}; }

  double distance(const Vec<2>& x) const override {
    double best = kInf;
    for (int k = 0; k <= k_max_; ++k) {
      Vec<2> corner(2.0 * k, 0.0);
      if (Box<2>{corner, corner + Vec<2>(1, 1)}.dist(x) >= best) continue;
      point_rec(x, corner, 1.0, k, best);
    }
    return best;
  }
  bool inside(const Vec<2>& x) const override {
    int k = static_cast<int>(std::floor(x[0] / 2.0));
    if (k < 0 || k > k_max_) return false;
    double u = x[0] - 2.0 * k, v = x[1];
    for (int depth = 0; depth < k; ++depth) {
      bool ulo = u < 0.25, uhi = u > 0.75, vlo = v < 0.25, vhi = v > 0.75;
      if (!((ulo || uhi) && (vlo || vhi))) return false;
      u = (uhi ? u - 0.75 : u) * 4.0;
      v = (vhi ? v - 0.75 : v) * 4.0;
    }
    return u > 0 && u < 1 && v > 0 && v < 1;
  }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    NearestBoundary<2> nb;
    nb.dist = kInf;
    for (int k = 0; k <= k_max_; ++k) {
      Vec<2> corner(2.0 * k, 0.0);
      if (Box<2>{corner, corner + Vec<2>(1, 1)}.dist(x) >= nb.dist) continue;
      nearest_rec(x, corner, 1.0, k, k, nb);
    }
    return nb;
  }
  double box_distance(const Box<2>& b) const override {
    double best = kInf;
    for (int k = 0; k <= k_max_; ++k) box_rec(b, {2.0 * k, 0.0}, 1.0, k, best);
    return best;
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int patch, const double* u) const override {
    int k = patch;
    long nsq = 1L << (2 * k);
    double t = u[0] * nsq;
    long idx = std::min(nsq - 1, static_cast<long>(t));
    double frac = t - idx;
    Vec<2> corner(2.0 * k, 0.0);
    double L = 1.0;
    for (int d = 0; d < k; ++d) {
      int digit = static_cast<int>((idx >> (2 * (k - 1 - d))) & 3);
      L *= 0.25;
      corner += Vec<2>((digit & 1) ? 3 * L : 0.0, (digit & 2) ? 3 * L : 0.0);
    }
    // Perimeter position, counterclockwise from the lower-left corner.
    double s = frac * 4.0;
    int side = std::min(3, static_cast<int>(s));
    double w = (s - side) * L;
    Vec<2> p, n;
    switch (side) {
      case 0: p = corner + Vec<2>(w, 0); n = {0, 1}; break;
      case 1: p = corner + Vec<2>(L, w); n = {-1, 0}; break;
      case 2: p = corner + Vec<2>(L - w, L); n = {0, -1}; break;
      default: p = corner + Vec<2>(0, L - w); n = {1, 0}; break;
    }
    return {p, 0.0, patch, n};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    double s = 0.0;
    for (int k = 0; k <= k_max_; ++k) s += measure_rec(c, r, {2.0 * k, 0.0}, 1.0, k);
    return s;
  }

 private:
  static void children(const Vec<2>& corner, double L, std::array<Vec<2>, 4>& out) {
    double o = 0.75 * L;
    out = {corner, corner + Vec<2>(o, 0), corner + Vec<2>(0, o), corner + Vec<2>(o, o)};
  }
  void point_rec(const Vec<2>& x, const Vec<2>& corner, double L, int depth, double& best) const {
    if (Box<2>{corner, corner + Vec<2>(L, L)}.dist(x) >= best) return;
    if (depth == 0) {
      best = std::min(best, dist_point_square_boundary(x, corner, L));
      return;
    }
    std::array<Vec<2>, 4> ch;
    children(corner, L, ch);
    for (const auto& c : ch) point_rec(x, c, L * 0.25, depth - 1, best);
  }
  void nearest_rec(const Vec<2>& x, const Vec<2>& corner, double L, int depth, int patch,
                   NearestBoundary<2>& nb) const {
    if (Box<2>{corner, corner + Vec<2>(L, L)}.dist(x) >= nb.dist) return;
    if (depth == 0) {
      Box<2> sq{corner, corner + Vec<2>(L, L)};
      Vec<2> p;
      if (sq.dist(x) > 0) {
        for (int a = 0; a < 2; ++a) p[a] = std::clamp(x[a], sq.lo[a], sq.hi[a]);
      } else {
        p = x;
        double m = kInf;
        int axis = 0;
        double v = 0;
        for (int a = 0; a < 2; ++a) {
          if (x[a] - sq.lo[a] < m) { m = x[a] - sq.lo[a]; axis = a; v = sq.lo[a]; }
          if (sq.hi[a] - x[a] < m) { m = sq.hi[a] - x[a]; axis = a; v = sq.hi[a]; }
        }
        p[axis] = v;
      }
      double d = (x - p).norm();
      if (d < nb.dist) nb = {p, d, patch};
      return;
    }
    std::array<Vec<2>, 4> ch;
    children(corner, L, ch);
    for (const auto& c : ch) nearest_rec(x, c, L * 0.25, depth - 1, patch, nb);
  }
  void box_rec(const Box<2>& b, const Vec<2>& corner, double L, int depth, double& best) const {
    Box<2> cell{corner, corner + Vec<2>(L, L)};
    double lb = 0.0;
    for (int a = 0; a < 2; ++a) {
      double d = std::max({cell.lo[a] - b.hi[a], 0.0, b.lo[a] - cell.hi[a]});
      lb += d * d;
    }
    if (std::sqrt(lb) >= best) return;
    if (depth == 0) {
      Vec<2> c00 = corner, c10 = corner + Vec<2>(L, 0), c01 = corner + Vec<2>(0, L),
             c11 = corner + Vec<2>(L, L);
      best = std::min({best, dist_box_segment(b, c00, c10), dist_box_segment(b, c10, c11),
                       dist_box_segment(b, c11, c01), dist_box_segment(b, c01, c00)});
      return;
    }
    std::array<Vec<2>, 4> ch;
    children(corner, L, ch);
    for (const auto& c : ch) box_rec(b, c, L * 0.25, depth - 1, best);
  }
  double measure_rec(const Vec<2>& c, double r, const Vec<2>& corner, double L, int depth) const {
    Box<2> cell{corner, corner + Vec<2>(L, L)};
    if (cell.dist(c) >= r) return 0.0;
    if (cell.far_dist(c) <= r) return 4.0 * L;  // stage perimeter is 4L at every depth
    if (depth == 0) {
      Vec<2> c00 = corner, c10 = corner + Vec<2>(L, 0), c01 = corner + Vec<2>(0, L),
             c11 = corner + Vec<2>(L, L);
      return segment_ball_length(c00, c10, c, r) + segment_ball_length(c10, c11, c, r) +
             segment_ball_length(c11, c01, c, r) + segment_ball_length(c01, c00, c, r);
    }
    std::array<Vec<2>, 4> ch;
    children(corner, L, ch);
    double s = 0.0;
    for (const auto& q : ch) s += measure_rec(c, r, q, L * 0.25, depth - 1);
    return s;
  }

  int k_max_;
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// punctured_plane{segment | full line}
// ---------------------------------------------------------------------------

class PuncturedPlaneDomain final : public DomainImpl<2> {
 public:
  PuncturedPlaneDomain(double x0, double x1, bool full_line)
      : x0_(x0), x1_(x1), full_(full_line) {
    if (!full_line && !(x0 < x1)) throw std::invalid_argument("punctured_plane: need x0 < x1");
    double len = full_ ? box_.side(0) : x1_ - x0_;
    patches_ = {{"face_up", 0.5 * len}, {"face_lo", 0.5 * len}};
  }
  std::string tag() const override { return "punctured_plane"; }
  Box<2> bbox() const override { return box_; }
  double distance(const Vec<2>& x) const override {
    if (full_) return std::abs(x[1]);
    return dist_point_segment(x, {x0_, 0}, {x1_, 0});
  }
  bool inside(const Vec<2>& x) const override { return distance(x) > 0.0; }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    Vec<2> p = full_ ? Vec<2>(x[0], 0.0) : closest_point_segment(x, {x0_, 0}, {x1_, 0});
    return {p, (x - p).norm(), x[1] >= 0 ? 0 : 1};
  }
  double box_distance(const Box<2>& b) const override {
    if (full_) return std::max({b.lo[1], 0.0, -b.hi[1]});
    return dist_box_segment(b, {x0_, 0}, {x1_, 0});
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  BoundarySample<2> sample_patch(int patch, const double* u) const override {
    double a = full_ ? box_.lo[0] : x0_;
    double b = full_ ? box_.hi[0] : x1_;
    Vec<2> p(a + u[0] * (b - a), 0.0);
    return {p, 0.0, patch, {0.0, patch == 0 ? 1.0 : -1.0}};
  }
  std::optional<double> surface_ball_measure(const Vec<2>& c, double r) const override {
    double a = full_ ? c[0] - 2 * r : x0_, b = full_ ? c[0] + 2 * r : x1_;
    return segment_ball_length({a, 0}, {b, 0}, c, r);
  }

 private:
  double x0_, x1_;
  bool full_;
  Box<2> box_{{-2, -2}, {2, 2}};
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// plank{n, eps, k_max}: upper half space minus disk lattices
//   Σ_k = disks of radius 2^{-eps k} c_k on lattice c_k Z^n at height 2^{-k},
//   c_k = 2^{-k(n+eps)}.  Built in R^3 (n = 2); plank2d is the visual analog.
// ---------------------------------------------------------------------------

class PlankDomain final : public DomainImpl<3> {
 public:
  PlankDomain(double eps, int k_max, std::vector<int> layers = {}) : eps_(eps) {
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("plank: eps must be in (0,1)");
    if (k_max < 1 || k_max > 12) throw std::invalid_argument("plank: k_max must be in [1,12]");
    if (layers.empty())
      for (int k = 1; k <= k_max; ++k) layers.push_back(k);
    for (int k : layers)
      if (k < 1 || k > 16) throw std::invalid_argument("plank: layer index out of range");
    layers_ = std::move(layers);
    patches_.push_back({"floor", box_.side(0) * box_.side(1)});
    for (int k : layers_) {
      double area = 0.5 * disk_count(k) * kPi * rho(k) * rho(k);
      patches_.push_back({"plank" + std::to_string(k) + "_top", area});
      patches_.push_back({"plank" + std::to_string(k) + "_bot", area});
    }
  }
  std::string tag() const override { return "plank"; }
  Box<3> bbox() const override { return box_; }

  double spacing(int k) const { return std::exp2(-k * (2.0 + eps_)); }
  double rho(int k) const { return std::exp2(-eps_ * k) * spacing(k); }
  double height(int k) const { return std::exp2(-static_cast<double>(k)); }

  double layer_distance(const Vec<3>& x, int k) const {
    double c = spacing(k);
    double dx = x[0] - std::round(x[0] / c) * c;
    double dy = x[1] - std::round(x[1] / c) * c;
    double horiz = std::max(0.0, std::hypot(dx, dy) - rho(k));
    return std::hypot(horiz, x[2] - height(k));
  }
  double distance(const Vec<3>& x) const override {
    double best = std::abs(x[2]);
    for (int k : layers_) best = std::min(best, layer_distance(x, k));
    return best;
  }
  bool inside(const Vec<3>& x) const override { return x[2] > 0 && distance(x) > 0; }
  NearestBoundary<3> nearest_boundary(const Vec<3>& x) const override {
    NearestBoundary<3> nb{{x[0], x[1], 0.0}, std::abs(x[2]), 0};
    for (size_t ki = 0; ki < layers_.size(); ++ki) {
      int k = layers_[ki];
      double d = layer_distance(x, k);
      if (d < nb.dist) {
        double c = spacing(k);
        Vec<2> ctr(std::round(x[0] / c) * c, std::round(x[1] / c) * c);
        Vec<2> v = Vec<2>(x[0], x[1]) - ctr;
        double vn = v.norm();
        if (vn > rho(k)) v *= rho(k) / vn;
        nb.point = {ctr[0] + v[0], ctr[1] + v[1], height(k)};
        nb.dist = d;
        nb.patch = 1 + 2 * static_cast<int>(ki) + (x[2] >= height(k) ? 0 : 1);
      }
    }
    return nb;
  }
  double box_distance(const Box<3>& b) const override {
    double best = std::max({b.lo[2], 0.0, -b.hi[2]});
    for (int k : layers_) {
      double c = spacing(k);
      double gx = dist_interval_lattice(b.lo[0], b.hi[0], c);
      double gy = dist_interval_lattice(b.lo[1], b.hi[1], c);
      double horiz = std::max(0.0, std::hypot(gx, gy) - rho(k));
      double dz = std::max({b.lo[2] - height(k), 0.0, height(k) - b.hi[2]});
      best = std::min(best, std::hypot(horiz, dz));
    }
    return best;
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }

  long axis_count(int k) const {
    double c = spacing(k), r = rho(k);
    // centers whose whole disk lies inside the window
    long lo = static_cast<long>(std::ceil((box_.lo[0] + r) / c));
    long hi = static_cast<long>(std::floor((box_.hi[0] - r) / c));
    return std::max(0L, hi - lo + 1);
  }
  long disk_count(int k) const { return axis_count(k) * axis_count(k); }

  BoundarySample<3> sample_patch(int patch, const double* u) const override {
    if (patch == 0) {
      BoundarySample<3> s;
      int n = 64;
      int idx = std::min(n * n - 1, static_cast<int>(u[0] * n * n));
      int i = idx % n, j = idx / n;
      s.point = {box_.lo[0] + (i + u[1]) / n * box_.side(0),
                 box_.lo[1] + (j + u[2]) / n * box_.side(1), 0.0};
      s.normal = {0, 0, 1};
      s.patch = 0;
      return s;
    }
    int k = layers_[(patch - 1) / 2];
    bool top = ((patch - 1) % 2) == 0;
    double c = spacing(k), r = rho(k);
    long per_axis = axis_count(k);
    long lo = static_cast<long>(std::ceil((box_.lo[0] + r) / c));
    long total = per_axis * per_axis;
    long idx = std::min(total - 1, static_cast<long>(u[0] * total));
    long i = idx % per_axis, j = idx / per_axis;
    double rr = r * std::sqrt(u[1]);
    double th = 2 * kPi * u[2];
    BoundarySample<3> s;
    s.point = {(lo + i) * c + rr * std::cos(th), (lo + j) * c + rr * std::sin(th), height(k)};
    s.normal = {0, 0, top ? 1.0 : -1.0};
    s.patch = patch;
    return s;
  }

  std::optional<double> surface_ball_measure(const Vec<3>& c, double r) const override {
    double total = 0.0;
    if (std::abs(c[2]) < r) {
      double w = std::sqrt(r * r - c[2] * c[2]);
      total += kPi * w * w;
    }
    for (int k : layers_) {
      double dz = c[2] - height(k);
      if (std::abs(dz) >= r) continue;
      double w = std::sqrt(r * r - dz * dz);
      double ck = spacing(k), rk = rho(k);
      long m0x = static_cast<long>(std::ceil((c[0] - w - rk) / ck));
      long m1x = static_cast<long>(std::floor((c[0] + w + rk) / ck));
      long m0y = static_cast<long>(std::ceil((c[1] - w - rk) / ck));
      long m1y = static_cast<long>(std::floor((c[1] + w + rk) / ck));
      if ((m1x - m0x + 1) * (m1y - m0y + 1) > 20'000'000L) return std::nullopt;
      for (long mx = m0x; mx <= m1x; ++mx)
        for (long my = m0y; my <= m1y; ++my) {
          double d = std::hypot(mx * ck - c[0], my * ck - c[1]);
          total += disk_disk_area(rk, w, d);
        }
    }
    return total;
  }

 private:
  double eps_;
  std::vector<int> layers_;
  Box<3> box_{{-1, -1, 0}, {1, 1, 2}};
  std::vector<PatchInfo> patches_;
};

/// Planar visualization analog of the plank domain (n = 1): horizontal
/// segments instead of disks.  Excluded from quantitative claims.
class Plank2dDomain final : public DomainImpl<2> {
 public:
  Plank2dDomain(double eps, int k_max) : eps_(eps), k_max_(k_max) {
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("plank2d: eps must be in (0,1)");
    if (k_max < 1 || k_max > 16) throw std::invalid_argument("plank2d: k_max must be in [1,16]");
    patches_.push_back({"floor", box_.side(0)});
    for (int k = 1; k <= k_max_; ++k) {
      double len = 0.5 * seg_count(k) * 2 * rho(k);
      patches_.push_back({"plank" + std::to_string(k) + "_top", len});
      patches_.push_back({"plank" + std::to_string(k) + "_bot", len});
    }
  }
  std::string tag() const override { return "plank2d"; }
  Box<2> bbox() const override { return box_; }
  double spacing(int k) const { return std::exp2(-k * (1.0 + eps_)); }
  double rho(int k) const { return std::exp2(-eps_ * k) * spacing(k); }
  double height(int k) const { return std::exp2(-static_cast<double>(k)); }
  double layer_distance(const Vec<2>& x, int k) const {
    double c = spacing(k);
    double dx = x[0] - std::round(x[0] / c) * c;
    double horiz = std::max(0.0, std::abs(dx) - rho(k));
    return std::hypot(horiz, x[1] - height(k));
  }
  double distance(const Vec<2>& x) const override {
    double best = std::abs(x[1]);
    for (int k = 1; k <= k_max_; ++k) best = std::min(best, layer_distance(x, k));
    return best;
  }
  bool inside(const Vec<2>& x) const override { return x[1] > 0 && distance(x) > 0; }
  NearestBoundary<2> nearest_boundary(const Vec<2>& x) const override {
    NearestBoundary<2> nb{{x[0], 0.0}, std::abs(x[1]), 0};
    for (int k = 1; k <= k_max_; ++k) {
      double d = layer_distance(x, k);
      if (d < nb.dist) {
        double c = spacing(k);
        double ctr = std::round(x[0] / c) * c;
        double u = std::clamp(x[0] - ctr, -rho(k), rho(k));
        nb = {{ctr + u, height(k)}, d, 1 + 2 * (k - 1) + (x[1] >= height(k) ? 0 : 1)};
      }
    }
    return nb;
  }
  double box_distance(const Box<2>& b) const override {
    double best = std::max({b.lo[1], 0.0, -b.hi[1]});
    for (int k = 1; k <= k_max_; ++k) {
      double gx = std::max(0.0, dist_interval_lattice(b.lo[0], b.hi[0], spacing(k)) - rho(k));
      double dz = std::max({b.lo[1] - height(k), 0.0, height(k) - b.hi[1]});
      best = std::min(best, std::hypot(gx, dz));
    }
    return best;
  }
  const std::vector<PatchInfo>& patches() const override { return patches_; }
  long seg_count(int k) const {
    double c = spacing(k), r = rho(k);
    long lo = static_cast<long>(std::ceil((box_.lo[0] + r) / c));
    long hi = static_cast<long>(std::floor((box_.hi[0] - r) / c));
    return std::max(0L, hi - lo + 1);
  }
  BoundarySample<2> sample_patch(int patch, const double* u) const override {
    if (patch == 0)
      return {{box_.lo[0] + u[0] * box_.side(0), 0.0}, 0.0, 0, {0, 1}};
    int k = 1 + (patch - 1) / 2;
    bool top = ((patch - 1) % 2) == 0;
    double c = spacing(k), r = rho(k);
    long n = seg_count(k);
    long lo = static_cast<long>(std::ceil((box_.lo[0] + r) / c));
    long idx = std::min(n - 1, static_cast<long>(u[0] * n));
    double t = (u[0] * n - idx) * 2 - 1;  // within-segment position
    return {{(lo + idx) * c + t * r, height(k)}, 0.0, patch, {0, top ? 1.0 : -1.0}};
  }

 private:
  double eps_;
  int k_max_;
  Box<2> box_{{-1, -1}, {1, 1}};
  std::vector<PatchInfo> patches_;
};

// ---------------------------------------------------------------------------
// factory
// ---------------------------------------------------------------------------

template <int D>
std::shared_ptr<const DomainImpl<D>> build_impl(const std::string& type, const json& params);

template <>
std::shared_ptr<const DomainImpl<2>> build_impl<2>(const std::string& type, const json& params) {
  if (type == "disk") return std::make_shared<DiskDomain>();
  if (type == "slit_disk") return std::make_shared<SlitDiskDomain>();
  if (type == "cross_disk") return std::make_shared<CrossDiskDomain>();
  if (type == "half_space") return std::make_shared<HalfSpaceDomain<2>>();
  if (type == "lipschitz_graph")
    return std::make_shared<LipschitzGraphDomain>(params.value("slope", 0.3));
  if (type == "four_corners")
    return std::make_shared<FourCornersDomain>(params.value("k_max", 8));
  if (type == "punctured_plane")
    return std::make_shared<PuncturedPlaneDomain>(params.value("x0", 0.0), params.value("x1", 1.0),
                                                  params.value("full_line", false));
  if (type == "plank2d")
    return std::make_shared<Plank2dDomain>(params.value("eps", 0.5), params.value("k_max", 6));
  throw std::invalid_argument("unknown 2d domain spec tag: " + type);
}

template <>
std::shared_ptr<const DomainImpl<3>> build_impl<3>(const std::string& type, const json& params) {
  if (type == "half_space") return std::make_shared<HalfSpaceDomain<3>>();
  if (type == "plank") {
    if (params.contains("n") && params["n"].get<int>() != 2)
      throw std::invalid_argument("plank: only n=2 (ambient R^3) is supported");
    std::vector<int> layers;
    if (params.contains("layers")) layers = params["layers"].get<std::vector<int>>();
    return std::make_shared<PlankDomain>(params.value("eps", 0.5), params.value("k_max", 6),
                                         layers);
  }
  throw std::invalid_argument("unknown 3d domain spec tag: " + type);
}

}  // namespace

template <int D>
Domain<D> make_domain(const std::string& json_spec) {
  json j = json::parse(json_spec);
  if (!j.contains("type")) throw std::invalid_argument("domain spec: missing \"type\"");
  json params = j.value("params", json::object());
  return Domain<D>(build_impl<D>(j["type"].get<std::string>(), params));
}

template <int D>
Domain<D> make_domain_tag(const std::string& tag) {
  return make_domain<D>("{\"type\":\"" + tag + "\"}");
}

template <int D>
std::vector<BoundarySample<D>> sample_boundary(const Domain<D>& dom, int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_boundary: count must be >= 1");
  const auto& patches = dom.patches();
  double total = 0.0;
  for (const auto& p : patches) total += p.measure;

  // Largest-remainder apportionment, at least one sample per patch.
  std::vector<int> alloc(patches.size(), 1);
  int remaining = std::max(0, count - static_cast<int>(patches.size()));
  std::vector<double> frac(patches.size());
  for (size_t i = 0; i < patches.size(); ++i) {
    double want = remaining * patches[i].measure / total;
    alloc[i] += static_cast<int>(want);
    frac[i] = want - std::floor(want);
  }
  int given = 0;
  for (int a : alloc) given += a;
  while (given < count) {
    size_t best = 0;
    for (size_t i = 1; i < patches.size(); ++i)
      if (frac[i] > frac[best]) best = i;
    ++alloc[best];
    frac[best] = -1;
    ++given;
  }

  std::vector<BoundarySample<D>> out;
  out.reserve(count);
  uint64_t rng = seed * 0x9e3779b97f4a7c15ull + 0x853c49e6748fea9bull;
  for (size_t p = 0; p < patches.size(); ++p) {
    int n = alloc[p];
    double w = patches[p].measure / n;
    for (int i = 0; i < n; ++i) {
      double u[3] = {(i + unit_double(rng)) / n, unit_double(rng), unit_double(rng)};
      BoundarySample<D> s = dom.impl().sample_patch(static_cast<int>(p), u);
      s.weight = w;
      s.patch = static_cast<int>(p);
      out.push_back(s);
    }
  }
  return out;
}

template <int D>
MeasureEstimate boundary_measure(const Domain<D>& dom, const Vec<D>& center, double r,
                                 const std::vector<BoundarySample<D>>* samples) {
  if (dom.distance(center) > dom.tol_geom())
    throw std::invalid_argument("boundary_measure: ball center not on the boundary");
  if (auto m = dom.impl().surface_ball_measure(center, r)) return {*m, 0.0, true};
  if (!samples) throw std::invalid_argument("boundary_measure: no analytic formula and no samples");
  double mass = 0.0, mass2 = 0.0, totw = 0.0;
  long n = 0;
  for (const auto& s : *samples) {
    bool in = (s.point - center).norm() <= r;
    mass += in ? s.weight : 0.0;
    mass2 += in ? s.weight * s.weight : 0.0;
    totw += s.weight;
    ++n;
  }
  // Binomial-style error on the weighted hit count.
  double se = std::sqrt(std::max(0.0, mass2));
  (void)totw;
  return {mass, se, false};
}

template <int D>
CorkscrewProbe<D> corkscrew_probe(const Domain<D>& dom, const Vec<D>& x, double r, double c,
                                  int grid, int refine_rounds) {
  if (!(c > 0 && c < 1)) throw std::invalid_argument("corkscrew_probe: need 0 < c < 1");
  if (r > dom.bbox().diam()) throw std::invalid_argument("corkscrew_probe: r exceeds box diameter");
  double need = c * r;
  auto admissible = [&](const Vec<D>& w) {
    return (w - x).norm() <= r - need && dom.inside(w) && dom.distance(w) >= need;
  };
  auto margin = [&](const Vec<D>& w) {
    if (!dom.inside(w)) return -kInf;
    return std::min(dom.distance(w) - need, (r - need) - (w - x).norm());
  };

  CorkscrewProbe<D> res;
  Vec<D> best = x;
  double best_m = -kInf;
  Vec<D> lo = x - Vec<D>::Constant(r), step = Vec<D>::Constant(2 * r / (grid - 1));
  std::vector<int> idx(D, 0);
  // coarse grid
  for (long flat = 0; flat < static_cast<long>(std::pow(grid, D)); ++flat) {
    long t = flat;
    Vec<D> w;
    for (int a = 0; a < D; ++a) {
      w[a] = lo[a] + (t % grid) * step[a];
      t /= grid;
    }
    double m = margin(w);
    if (m > best_m) {
      best_m = m;
      best = w;
    }
  }
  // local refinement around the best candidate
  double h = 2 * r / (grid - 1);
  for (int round = 0; round < refine_rounds; ++round) {
    h *= 0.25;
    Vec<D> centre = best;
    for (long flat = 0; flat < static_cast<long>(std::pow(5, D)); ++flat) {
      long t = flat;
      Vec<D> w;
      for (int a = 0; a < D; ++a) {
        w[a] = centre[a] + ((t % 5) - 2) * h;
        t /= 5;
      }
      double m = margin(w);
      if (m > best_m) {
        best_m = m;
        best = w;
      }
    }
  }
  if (admissible(best)) {
    res.found = true;
    res.witness = best;
    res.clearance = dom.distance(best);
  }
  return res;
}

template <int D>
std::string samples_to_csv(const std::vector<BoundarySample<D>>& samples) {
  std::ostringstream os;
  os.precision(17);
  os << (D == 2 ? "x,y" : "x,y,z") << ",weight,patch\n";
  for (const auto& s : samples) {
    for (int a = 0; a < D; ++a) os << s.point[a] << ",";
    os << s.weight << "," << s.patch << "\n";
  }
  return os.str();
}

template Domain<2> make_domain<2>(const std::string&);
template Domain<3> make_domain<3>(const std::string&);
template Domain<2> make_domain_tag<2>(const std::string&);
template Domain<3> make_domain_tag<3>(const std::string&);
template std::vector<BoundarySample<2>> sample_boundary<2>(const Domain<2>&, int, uint64_t);
template std::vector<BoundarySample<3>> sample_boundary<3>(const Domain<3>&, int, uint64_t);
template MeasureEstimate boundary_measure<2>(const Domain<2>&, const Vec<2>&, double,
                                             const std::vector<BoundarySample<2>>*);
template MeasureEstimate boundary_measure<3>(const Domain<3>&, const Vec<3>&, double,
                                             const std::vector<BoundarySample<3>>*);
template CorkscrewProbe<2> corkscrew_probe<2>(const Domain<2>&, const Vec<2>&, double, double, int,
                                              int);
template CorkscrewProbe<3> corkscrew_probe<3>(const Domain<3>&, const Vec<3>&, double, double, int,
                                              int);
template std::string samples_to_csv<2>(const std::vector<BoundarySample<2>>&);
template std::string samples_to_csv<3>(const std::vector<BoundarySample<3>>&);

}  // namespace qc
