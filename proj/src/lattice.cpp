#include "quantconn/lattice.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qc {

template <int D>
void Lattice<D>::rebuild_grid() {
  grid_.build(points, std::max(ell(depth), 1e-12 * ell0));
}

namespace {

template <int D>
std::vector<int> lex_order(const std::vector<Vec<D>>& pts) {
  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int ax = 0; ax < D; ++ax) {
      if (pts[a][ax] != pts[b][ax]) return pts[a][ax] < pts[b][ax];
    }
    return a < b;
  });
  return order;
}

}  // namespace

template <int D>
Lattice<D> build_lattice(const std::vector<BoundarySample<D>>& samples, int depth) {
  if (samples.size() < 2) throw std::invalid_argument("build_lattice: need at least 2 samples");
  if (depth < 0 || depth > 14) throw std::invalid_argument("build_lattice: depth must be in [0,14]");

  Lattice<D> lat;
  lat.depth = depth;
  const int n = static_cast<int>(samples.size());
  lat.points.resize(n);
  lat.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    lat.points[i] = samples[i].point;
    lat.weights[i] = samples[i].weight;
  }

  Vec<D> lo = lat.points[0], hi = lat.points[0];
  for (const auto& p : lat.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double extent = (hi - lo).norm();
  if (extent <= 0) throw std::invalid_argument("build_lattice: degenerate (coincident) samples");
  lat.ell0 = std::exp2(std::ceil(std::log2(extent)));

  // Construction, finest level first.  Level `depth`: maximal greedy
  // 2^{-depth} ℓ0 net (lexicographic order, deterministic), global
  // nearest-net cells, Lloyd recentering.  Coarser level k: greedy net at
  // separation 2^{-k} ℓ0; each level-(k+1) cube attaches wholesale to the net
  // point nearest its center (the parent-consistency repair), so partition
  // and nesting are exact by construction; Lloyd sweeps then recenter each
  // cube on its σ-weighted centroid.
  const std::vector<int> order = lex_order<D>(lat.points);
  constexpr int kLloydSweeps = 60;

  auto greedy_net = [&](double sep) {
    std::vector<int> net;
    std::vector<Vec<D>> net_pts;
    SpatialGrid<D> net_grid;
    net_grid.build(net_pts, sep);
    for (int i : order) {
      bool blocked = false;
      net_grid.for_each_within(lat.points[i], sep * (1 - 1e-14), [&](int) { blocked = true; });
      if (blocked) continue;
      net.push_back(i);
      net_pts.push_back(lat.points[i]);
      net_grid.insert(static_cast<int>(net_pts.size()) - 1);
    }
    return net;
  };

  lat.level_cubes.assign(depth + 1, {});
  lat.cube_of.assign(depth + 1, std::vector<int>(n, -1));

  // ---- finest level ----
  {
    std::vector<int> net = greedy_net(lat.ell(depth));
    std::vector<Vec<D>> centers;
    for (int q : net) centers.push_back(lat.points[q]);
    std::vector<int> assign(n, -1);
    auto reassign = [&] {
      SpatialGrid<D> g;
      g.build(centers, std::max(lat.ell(depth), 1e-12 * lat.ell0));
      for (int s = 0; s < n; ++s) assign[s] = g.nearest(lat.points[s]);
    };
    reassign();
    for (int sweep = 0; sweep < kLloydSweeps; ++sweep) {
      std::vector<Vec<D>> centroid(net.size(), Vec<D>::Zero());
      std::vector<double> mass(net.size(), 0.0);
      for (int s = 0; s < n; ++s) {
        centroid[assign[s]] += lat.weights[s] * lat.points[s];
        mass[assign[s]] += lat.weights[s];
      }
      std::vector<double> best_d(net.size(), kInf);
      std::vector<int> best_s(net.size(), -1);
      for (int s = 0; s < n; ++s) {
        int c = assign[s];
        if (mass[c] <= 0) continue;
        double d = (lat.points[s] - centroid[c] / mass[c]).norm();
        if (d < best_d[c] || (d == best_d[c] && s < best_s[c])) {
          best_d[c] = d;
          best_s[c] = s;
        }
      }
      bool moved = false;
      for (size_t j = 0; j < net.size(); ++j)
        if (best_s[j] >= 0 && net[j] != best_s[j]) {
          net[j] = best_s[j];
          centers[j] = lat.points[best_s[j]];
          moved = true;
        }
      reassign();
      if (!moved) break;
    }
    // materialize, dropping cells that lost every member
    std::vector<int> cube_of_cell(net.size(), -1);
    std::vector<char> used(net.size(), 0);
    for (int s = 0; s < n; ++s) used[assign[s]] = 1;
    for (size_t j = 0; j < net.size(); ++j) {
      if (!used[j]) continue;
      LatticeCube c;
      c.id = static_cast<int>(lat.cubes.size());
      c.level = depth;
      c.net = net[j];
      lat.cubes.push_back(c);
      lat.level_cubes[depth].push_back(c.id);
      cube_of_cell[j] = c.id;
    }
    for (int s = 0; s < n; ++s) lat.cube_of[depth][s] = cube_of_cell[assign[s]];
  }

  // ---- coarser levels ----
  for (int k = depth - 1; k >= 0; --k) {
    const std::vector<int>& kids = lat.level_cubes[k + 1];
    // child centroid masses for the recentering step
    std::vector<Vec<D>> kid_centroid(kids.size(), Vec<D>::Zero());
    std::vector<double> kid_mass(kids.size(), 0.0);
    std::unordered_map<int, int> kid_index;
    for (size_t j = 0; j < kids.size(); ++j) kid_index[kids[j]] = static_cast<int>(j);
    for (int s = 0; s < n; ++s) {
      int j = kid_index[lat.cube_of[k + 1][s]];
      kid_centroid[j] += lat.weights[s] * lat.points[s];
      kid_mass[j] += lat.weights[s];
    }
    std::vector<int> net = greedy_net(lat.ell(k));
    std::vector<Vec<D>> centers;
    for (int q : net) centers.push_back(lat.points[q]);
    std::vector<int> attach(kids.size(), -1);
    auto reattach = [&] {
      SpatialGrid<D> g;
      g.build(centers, std::max(lat.ell(k), 1e-12 * lat.ell0));
      for (size_t j = 0; j < kids.size(); ++j)
        attach[j] = g.nearest(lat.points[lat.cubes[kids[j]].net]);
    };
    reattach();
    for (int sweep = 0; sweep < kLloydSweeps; ++sweep) {
      std::vector<Vec<D>> centroid(net.size(), Vec<D>::Zero());
      std::vector<double> mass(net.size(), 0.0);
      for (size_t j = 0; j < kids.size(); ++j) {
        centroid[attach[j]] += kid_centroid[j];
        mass[attach[j]] += kid_mass[j];
      }
      // recenter on the child net sample nearest the cube centroid
      std::vector<double> best_d(net.size(), kInf);
      std::vector<int> best_s(net.size(), -1);
      for (size_t j = 0; j < kids.size(); ++j) {
        int c = attach[j];
        if (mass[c] <= 0) continue;
        int q = lat.cubes[kids[j]].net;
        double d = (lat.points[q] - centroid[c] / mass[c]).norm();
        if (d < best_d[c] || (d == best_d[c] && q < best_s[c])) {
          best_d[c] = d;
          best_s[c] = q;
        }
      }
      bool moved = false;
      for (size_t j = 0; j < net.size(); ++j)
        if (best_s[j] >= 0 && net[j] != best_s[j]) {
          net[j] = best_s[j];
          centers[j] = lat.points[best_s[j]];
          moved = true;
        }
      reattach();
      if (!moved) break;
    }
    std::vector<int> cube_of_cell(net.size(), -1);
    std::vector<char> used(net.size(), 0);
    for (size_t j = 0; j < kids.size(); ++j) used[attach[j]] = 1;
    for (size_t j = 0; j < net.size(); ++j) {
      if (!used[j]) continue;
      LatticeCube c;
      c.id = static_cast<int>(lat.cubes.size());
      c.level = k;
      c.net = net[j];
      lat.cubes.push_back(c);
      lat.level_cubes[k].push_back(c.id);
      cube_of_cell[j] = c.id;
    }
    for (size_t j = 0; j < kids.size(); ++j) {
      int parent = cube_of_cell[attach[j]];
      lat.cubes[kids[j]].parent = parent;
      lat.cubes[parent].children.push_back(kids[j]);
    }
    for (int s = 0; s < n; ++s)
      lat.cube_of[k][s] = lat.cubes[lat.cube_of[k + 1][s]].parent;
  }

  // Collect member lists from the final assignment.
  lat.members_of.assign(lat.cubes.size(), {});
  for (int k = 0; k <= depth; ++k)
    for (int s = 0; s < n; ++s) lat.members_of[lat.cube_of[k][s]].push_back(s);
  for (const auto& c : lat.cubes)
    if (lat.members_of[c.id].empty())
      throw std::logic_error("build_lattice: internal empty cube");

  // σ bottom-up: leaves from samples, parents as exact sums of children.
  for (int c : lat.level_cubes[depth]) {
    double s = 0.0;
    for (int i : lat.members_of[c]) s += lat.weights[i];
    lat.cubes[c].sigma = s;
  }
  for (int k = depth - 1; k >= 0; --k)
    for (int c : lat.level_cubes[k]) {
      double s = 0.0;
      for (int ch : lat.cubes[c].children) s += lat.cubes[ch].sigma;
      lat.cubes[c].sigma = s;
    }

  lat.rebuild_grid();
  return lat;
}

template <int D>
CubeGeometry<D> cube_geometry(const Lattice<D>& lat, int cube) {
  if (cube < 0 || cube >= static_cast<int>(lat.cubes.size()))
    throw std::invalid_argument("cube_geometry: invalid cube id");
  const LatticeCube& c = lat.cubes[cube];
  CubeGeometry<D> g;
  g.center = lat.points[c.net];
  g.ell = lat.ell(c.level);
  g.sigma = c.sigma;
  g.ball_radius = 4.0 * g.ell;
  int level = c.level;
  int nearest_out = lat.grid().nearest_if(
      g.center, [&](int s) { return lat.cube_of[level][s] != cube; });
  g.r_inner = nearest_out < 0 ? kInf : (lat.points[nearest_out] - g.center).norm();
  return g;
}

template <int D>
std::vector<int> relatives(const Lattice<D>& lat, int cube, Relation rel, double arg) {
  if (cube < 0 || cube >= static_cast<int>(lat.cubes.size()))
    throw std::invalid_argument("relatives: invalid cube id");
  const LatticeCube& c = lat.cubes[cube];
  switch (rel) {
    case Relation::parent:
      return c.parent >= 0 ? std::vector<int>{c.parent} : std::vector<int>{};
    case Relation::children:
      return c.children;
    case Relation::descendants_at: {
      int j = static_cast<int>(arg);
      if (j < 0 || c.level + j > lat.depth)
        throw std::invalid_argument("relatives: descendant level out of range");
      std::vector<int> cur{cube};
      for (int step = 0; step < j; ++step) {
        std::vector<int> next;
        for (int q : cur)
          next.insert(next.end(), lat.cubes[q].children.begin(), lat.cubes[q].children.end());
        cur = std::move(next);
      }
      return cur;
    }
    case Relation::dilate: {
      double lambda = arg;
      if (lambda < 1.0) throw std::invalid_argument("relatives: dilate needs λ >= 1");
      double r = (lambda - 1.0) * lat.ell(c.level);
      std::vector<char> in(lat.points.size(), 0);
      for (int s : lat.members_of[cube]) in[s] = 1;
      if (r > 0)
        for (int s : lat.members_of[cube])
          lat.grid().for_each_within(lat.points[s], r, [&](int t) { in[t] = 1; });
      std::vector<int> out;
      for (size_t s = 0; s < in.size(); ++s)
        if (in[s]) out.push_back(static_cast<int>(s));
      return out;
    }
  }
  return {};
}

template <int D>
std::vector<LatticeLevelStats> lattice_stats(const Lattice<D>& lat) {
  std::vector<LatticeLevelStats> out;
  for (int k = 0; k <= lat.depth; ++k) {
    LatticeLevelStats st;
    st.level = k;
    st.cube_count = static_cast<int>(lat.level_cubes[k].size());
    st.a0 = kInf;
    st.c1 = 0.0;
    for (int c : lat.level_cubes[k]) {
      CubeGeometry<D> g = cube_geometry(lat, c);
      st.a0 = std::min(st.a0, g.r_inner / g.ell);
      double outer = 0.0;
      for (int s : lat.members_of[c])
        outer = std::max(outer, (lat.points[s] - g.center).norm());
      st.c1 = std::max(st.c1, outer / g.ell);
    }
    if (!std::isfinite(st.a0)) st.a0 = 1.0;  // single-cube level
    out.push_back(st);
  }
  return out;
}

template <int D>
double thin_boundary_fraction(const Lattice<D>& lat, int level, double theta) {
  double worst = 0.0;
  double r = theta * lat.ell(level);
  for (int c : lat.level_cubes[level]) {
    double close_mass = 0.0, total = 0.0;
    for (int s : lat.members_of[c]) {
      total += lat.weights[s];
      bool near_complement = false;
      lat.grid().for_each_within(lat.points[s], r, [&](int t) {
        if (lat.cube_of[level][t] != c) near_complement = true;
      });
      if (near_complement) close_mass += lat.weights[s];
    }
    if (total > 0) worst = std::max(worst, close_mass / total);
  }
  return worst;
}

namespace {

template <int D>
nlohmann::json cube_json(const Lattice<D>& lat, int id) {
  const LatticeCube& c = lat.cubes[id];
  nlohmann::json j;
  j["id"] = c.id;
  j["level"] = c.level;
  std::vector<double> ctr(D);
  for (int a = 0; a < D; ++a) ctr[a] = lat.points[c.net][a];
  j["center"] = ctr;
  j["ell"] = lat.ell(c.level);
  j["sigma"] = c.sigma;
  j["children"] = nlohmann::json::array();
  for (int ch : c.children) j["children"].push_back(cube_json(lat, ch));
  return j;
}

}  // namespace

template <int D>
std::string lattice_to_json(const Lattice<D>& lat) {
  nlohmann::json j = nlohmann::json::array();
  for (int c : lat.level_cubes[0]) j.push_back(cube_json(lat, c));
  return j.dump();
}

template class Lattice<2>;
template class Lattice<3>;
template Lattice<2> build_lattice<2>(const std::vector<BoundarySample<2>>&, int);
template Lattice<3> build_lattice<3>(const std::vector<BoundarySample<3>>&, int);
template CubeGeometry<2> cube_geometry<2>(const Lattice<2>&, int);
template CubeGeometry<3> cube_geometry<3>(const Lattice<3>&, int);
template std::vector<int> relatives<2>(const Lattice<2>&, int, Relation, double);
template std::vector<int> relatives<3>(const Lattice<3>&, int, Relation, double);
template std::vector<LatticeLevelStats> lattice_stats<2>(const Lattice<2>&);
template std::vector<LatticeLevelStats> lattice_stats<3>(const Lattice<3>&);
template double thin_boundary_fraction<2>(const Lattice<2>&, int, double);
template double thin_boundary_fraction<3>(const Lattice<3>&, int, double);
template std::string lattice_to_json<2>(const Lattice<2>&);
template std::string lattice_to_json<3>(const Lattice<3>&);

}  // namespace qc
