#include "quantconn/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qc {

namespace {

constexpr long kMaxCubes = 6'000'000;

template <int D>
uint64_t coord_key(const Eigen::Matrix<int64_t, D, 1>& c, int level) {
  uint64_t h = 1469598103934665603ull ^ (static_cast<uint64_t>(level) * 0x9e3779b97f4a7c15ull);
  for (int a = 0; a < D; ++a) {
    h = (h ^ static_cast<uint64_t>(c[a])) * 1099511628211ull;
    h ^= h >> 31;
  }
  return h;
}

}  // namespace

template <int D>
uint64_t WhitneyDecomposition<D>::key(int level, const Vec<D>& corner) const {
  double s = side_at(level);
  Eigen::Matrix<int64_t, D, 1> c;
  for (int a = 0; a < D; ++a) c[a] = llround((corner[a] - root_corner[a]) / s);
  return coord_key<D>(c, level);
}

template <int D>
void WhitneyDecomposition<D>::build_index() {
  int max_level = 0;
  for (const auto& c : cubes) max_level = std::max(max_level, c.level);
  level_index_.assign(max_level + 1, {});
  for (int i = 0; i < static_cast<int>(cubes.size()); ++i)
    level_index_[cubes[i].level][key(cubes[i].level, cubes[i].corner)] = i;

  // Neighbor lists: candidates live within two dyadic levels (side ratio is
  // at most 4 between touching Whitney cubes) and within one cell of overlap.
  for (int i = 0; i < static_cast<int>(cubes.size()); ++i) {
    const auto& I = cubes[i];
    Box<D> ib = I.box();
    for (int lvl = std::max(0, I.level - 2);
         lvl <= std::min(levels() - 1, I.level + 2); ++lvl) {
      double s = side_at(lvl);
      Eigen::Matrix<int64_t, D, 1> lo, hi;
      for (int a = 0; a < D; ++a) {
        lo[a] = static_cast<int64_t>(std::floor((ib.lo[a] - root_corner[a]) / s)) - 1;
        hi[a] = static_cast<int64_t>(std::floor((ib.hi[a] - root_corner[a]) / s)) + 1;
      }
      Eigen::Matrix<int64_t, D, 1> c = lo;
      while (true) {
        auto it = level_index_[lvl].find(coord_key<D>(c, lvl));
        if (it != level_index_[lvl].end() && it->second != i) {
          const auto& J = cubes[it->second];
          bool touch = true;
          for (int a = 0; a < D; ++a)
            if (J.corner[a] + J.side < ib.lo[a] || ib.hi[a] < J.corner[a]) touch = false;
          if (touch) cubes[i].neighbors.push_back(it->second);
        }
        int a = 0;
        for (; a < D; ++a) {
          if (++c[a] <= hi[a]) break;
          c[a] = lo[a];
        }
        if (a == D) break;
      }
    }
    std::sort(cubes[i].neighbors.begin(), cubes[i].neighbors.end());
    cubes[i].neighbors.erase(std::unique(cubes[i].neighbors.begin(), cubes[i].neighbors.end()),
                             cubes[i].neighbors.end());
  }
}

template <int D>
int WhitneyDecomposition<D>::locate(const Vec<D>& x) const {
  for (int lvl = levels() - 1; lvl >= 0; --lvl) {
    double s = side_at(lvl);
    Eigen::Matrix<int64_t, D, 1> c;
    bool ok = true;
    for (int a = 0; a < D; ++a) {
      double t = (x[a] - root_corner[a]) / s;
      if (t < 0) ok = false;
      c[a] = static_cast<int64_t>(std::floor(t));
    }
    if (!ok) continue;
    auto it = level_index_[lvl].find(coord_key<D>(c, lvl));
    if (it != level_index_[lvl].end()) {
      const auto& I = cubes[it->second];
      bool in = true;
      for (int a = 0; a < D; ++a)
        if (x[a] < I.corner[a] || x[a] >= I.corner[a] + I.side) in = false;
      if (in) return it->second;
    }
  }
  return -1;
}

template <int D>
std::vector<int> WhitneyDecomposition<D>::fattened_containers(const Vec<D>& x, double tau) const {
  std::vector<int> out;
  int base = locate(x);
  if (base < 0) return out;
  out.push_back(base);
  for (int j : cubes[base].neighbors) {
    Box<D> fat = cubes[j].box().dilated(1 + tau);
    bool in = true;
    for (int a = 0; a < D; ++a)
      if (x[a] <= fat.lo[a] || x[a] >= fat.hi[a]) in = false;
    if (in) out.push_back(j);
  }
  return out;
}

namespace {

template <int D>
void refine(const Domain<D>& dom, WhitneyDecomposition<D>& w, const Vec<D>& corner, int level) {
  WhitneyCube<D> cube;
  cube.corner = corner;
  cube.side = w.side_at(level);
  cube.level = level;
  double gauge = dom.box_distance(cube.box().dilated(4.0));
  if (gauge >= 4.0 * cube.diam()) {
    cube.dist = dom.box_distance(cube.box());
    w.cubes.push_back(cube);
    if (static_cast<long>(w.cubes.size()) > kMaxCubes)
      throw std::runtime_error("whitney: cube budget exceeded, raise min_side");
    return;
  }
  if (cube.side <= w.min_side * (1 + 1e-12)) {
    w.uncovered_volume += cube.box().volume();
    return;
  }
  double h = cube.side / 2;
  for (int q = 0; q < (1 << D); ++q) {
    Vec<D> c = corner;
    for (int a = 0; a < D; ++a)
      if (q & (1 << a)) c[a] += h;
    refine(dom, w, c, level + 1);
  }
}

}  // namespace

template <int D>
WhitneyDecomposition<D> decompose(const Domain<D>& dom, const Box<D>& box, double min_side) {
  if (!(min_side > 0)) throw std::invalid_argument("decompose: min_side must be positive");
  WhitneyDecomposition<D> w;
  double extent = 0.0;
  for (int a = 0; a < D; ++a) extent = std::max(extent, box.side(a));
  w.root_side = std::exp2(std::ceil(std::log2(extent)));
  w.root_corner = box.lo;
  w.min_side = min_side;
  refine(dom, w, w.root_corner, 0);
  if (w.cubes.empty()) throw std::invalid_argument("decompose: box does not meet the complement");
  w.build_index();
  return w;
}

template <int D>
WhitneyDecomposition<D> decompose(const Domain<D>& dom, double min_side) {
  return decompose(dom, dom.bbox(), min_side);
}

template <int D>
Box<D> fatten(const WhitneyDecomposition<D>& w, int cube, double tau) {
  if (!(tau > 0 && tau <= w.tau0)) throw std::invalid_argument("fatten: need 0 < tau <= tau0");
  return w.cubes[cube].box().dilated(1 + tau);
}

template <int D>
WhitneyRegion<D> whitney_region(const WhitneyDecomposition<D>& w, const Lattice<D>& lat, int Q,
                                double eta, double K, double tau) {
  if (!(eta > 0 && eta < 1 && K > 1)) throw std::invalid_argument("whitney_region: need 0<eta<1<K");
  if (!(tau > 0 && tau <= w.tau0)) throw std::invalid_argument("whitney_region: bad tau");
  WhitneyRegion<D> region;
  region.tau = tau;
  region.eta = eta;
  region.K = K;
  double ellQ = lat.ell_of(Q);
  double lo = std::pow(eta, 0.25) * ellQ;
  double hi = std::sqrt(K) * ellQ;
  const auto& members = lat.members_of[Q];
  Vec<D> xQ = lat.center_of(Q);
  for (int i = 0; i < static_cast<int>(w.cubes.size()); ++i) {
    const auto& I = w.cubes[i];
    if (I.side < lo || I.side > hi) continue;
    Box<D> ib = I.box();
    if (ib.dist(xQ) > hi + 8.0 * ellQ) continue;  // cheap prefilter
    double d = kInf;
    for (int s : members) {
      d = std::min(d, ib.dist(lat.points[s]));
      if (d == 0.0) break;
    }
    if (d <= hi) region.cube_ids.push_back(i);
  }
  return region;
}

template <int D>
bool region_contains(const WhitneyDecomposition<D>& w, const WhitneyRegion<D>& region,
                     const Vec<D>& x) {
  for (int i : region.cube_ids) {
    Box<D> fat = w.cubes[i].box().dilated(1 + region.tau);
    bool in = true;
    for (int a = 0; a < D; ++a)
      if (x[a] <= fat.lo[a] || x[a] >= fat.hi[a]) in = false;
    if (in) return true;
  }
  return false;
}

template <int D>
std::string whitney_to_csv(const WhitneyDecomposition<D>& w) {
  std::ostringstream os;
  os.precision(17);
  os << (D == 2 ? "x,y" : "x,y,z") << ",side,dist,neighbors\n";
  for (const auto& c : w.cubes) {
    for (int a = 0; a < D; ++a) os << c.corner[a] << ",";
    os << c.side << "," << c.dist << "," << c.neighbors.size() << "\n";
  }
  return os.str();
}

template <int D>
std::string whitney_edges_csv(const WhitneyDecomposition<D>& w) {
  std::ostringstream os;
  os << "i,j\n";
  for (int i = 0; i < static_cast<int>(w.cubes.size()); ++i)
    for (int j : w.cubes[i].neighbors)
      if (i < j) os << i << "," << j << "\n";
  return os.str();
}

template class WhitneyDecomposition<2>;
template class WhitneyDecomposition<3>;
template WhitneyDecomposition<2> decompose<2>(const Domain<2>&, const Box<2>&, double);
template WhitneyDecomposition<3> decompose<3>(const Domain<3>&, const Box<3>&, double);
template WhitneyDecomposition<2> decompose<2>(const Domain<2>&, double);
template WhitneyDecomposition<3> decompose<3>(const Domain<3>&, double);
template Box<2> fatten<2>(const WhitneyDecomposition<2>&, int, double);
template Box<3> fatten<3>(const WhitneyDecomposition<3>&, int, double);
template WhitneyRegion<2> whitney_region<2>(const WhitneyDecomposition<2>&, const Lattice<2>&, int,
                                            double, double, double);
template WhitneyRegion<3> whitney_region<3>(const WhitneyDecomposition<3>&, const Lattice<3>&, int,
                                            double, double, double);
template bool region_contains<2>(const WhitneyDecomposition<2>&, const WhitneyRegion<2>&,
                                 const Vec<2>&);
template bool region_contains<3>(const WhitneyDecomposition<3>&, const WhitneyRegion<3>&,
                                 const Vec<3>&);
template std::string whitney_to_csv<2>(const WhitneyDecomposition<2>&);
template std::string whitney_to_csv<3>(const WhitneyDecomposition<3>&);
template std::string whitney_edges_csv<2>(const WhitneyDecomposition<2>&);
template std::string whitney_edges_csv<3>(const WhitneyDecomposition<3>&);

}  // namespace qc
