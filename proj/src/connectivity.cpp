#include "quantconn/connectivity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace qc {

namespace {

/// Walks the polyline emitting (point, cumulative length); geometric steps on
/// the first segment (whose start sits on the boundary), adaptive marching
/// with step <= δ/8 elsewhere.
template <int D, typename F>
void densify(const Domain<D>& dom, const std::vector<Vec<D>>& verts, F&& emit,
             double coarse = 8.0) {
  double L = 0.0;
  for (size_t i = 0; i + 1 < verts.size(); ++i) {
    Vec<D> a = verts[i], b = verts[i + 1];
    double len = (b - a).norm();
    if (len <= 0) continue;
    Vec<D> dir = (b - a) / len;
    if (i == 0) {
      for (int j = 40; j >= 1; --j) {
        double t = len * std::exp2(-j);
        emit(a + t * dir, L + t);
      }
    } else {
      double t = 0.0;
      while (t < len) {
        double d = dom.distance(a + t * dir);
        double step = std::max(d / coarse, len / 4096.0);
        t = std::min(len, t + step);
        if (t < len) emit(a + t * dir, L + t);
      }
    }
    L += len;
    emit(b, L);
  }
}

}  // namespace

template <int D>
CarrotVerdict<D> verify_carrot(const Domain<D>& dom, const std::vector<Vec<D>>& vertices,
                               double lambda) {
  CarrotVerdict<D> v;
  if (vertices.size() < 2) return v;
  if (dom.distance(vertices.front()) > dom.tol_geom()) return v;  // y must be on ∂Ω
  if (!dom.inside(vertices.back())) return v;
  double worst = kInf;
  Vec<D> worst_pt = vertices.back();
  bool left = false;
  densify(dom, vertices, [&](const Vec<D>& z, double L) {
    if (L <= 0) return;
    if (!dom.inside(z)) {
      left = true;
      return;
    }
    double ratio = dom.distance(z) / L;
    if (ratio < worst) {
      worst = ratio;
      worst_pt = z;
    }
  });
  v.worst_ratio = worst;
  v.worst_point = worst_pt;
  v.leaves_domain = left;
  v.ok = !left && worst >= lambda;
  return v;
}

template <int D>
ChainVerdict verify_chain(const Domain<D>& dom, const HarnackChain<D>& chain, double C) {
  ChainVerdict v;
  size_t n = chain.size();
  if (n == 0) return v;
  v.consecutive_ok = true;
  for (size_t j = 0; j + 1 < n; ++j)
    if ((chain.centers[j] - chain.centers[j + 1]).norm() >=
        chain.radii[j] + chain.radii[j + 1] - 1e-13)
      v.consecutive_ok = false;
  if ((chain.x - chain.centers.front()).norm() > chain.radii.front() + 1e-13)
    v.consecutive_ok = false;

  v.depth_C = 0.0;
  for (size_t j = 0; j < n; ++j) {
    double depth = dom.distance(chain.centers[j]) - chain.radii[j];
    if (depth <= 0) {
      v.depth_C = kInf;  // ball not inside Ω
      break;
    }
    v.depth_C = std::max(v.depth_C, std::max(chain.radii[j] / depth, depth / chain.radii[j]));
  }

  double run_min = kInf;
  v.growth_C = 0.0;
  for (size_t j = 0; j < n; ++j) {
    run_min = std::min(run_min, chain.radii[j]);
    v.growth_C = std::max(v.growth_C, chain.radii[j] / run_min);
  }

  std::vector<double> sorted = chain.radii;
  std::sort(sorted.begin(), sorted.end());
  v.band_count = 0;
  for (size_t j = 0; j < n; ++j) {
    double t = sorted[j] / 2;  // band (t, 2t] with upper endpoint at r_j
    auto lo = std::upper_bound(sorted.begin(), sorted.end(), t);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), 2 * t);
    v.band_count = std::max(v.band_count, static_cast<int>(hi - lo));
  }

  v.endpoint_gap = std::max(0.0, (chain.y - chain.centers.back()).norm() - chain.radii.back());
  v.min_C = std::max({v.depth_C, v.growth_C, static_cast<double>(v.band_count)});
  v.ok = v.consecutive_ok && v.min_C <= C;
  return v;
}

template <int D>
HarnackChain<D> path_to_chain(const Domain<D>& dom, const CarrotPath<D>& path) {
  // candidate balls B(z, δ(z)/10) along the densified path
  struct Cand {
    Vec<D> c;
    double r;
    double param;
  };
  std::vector<Cand> cands;
  double floor_r = 1e-7 * path.length();
  densify(dom, path.vertices, [&](const Vec<D>& z, double L) {
    double d = dom.distance(z);
    if (d / 10 > floor_r) cands.push_back({z, d / 10, L});
  }, 4.0);

  // Vitali: radius-descending greedy, keep pairwise disjoint balls
  std::vector<int> order(cands.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (cands[a].r != cands[b].r) return cands[a].r > cands[b].r;
    return cands[a].param < cands[b].param;
  });
  std::vector<int> picked;
  for (int i : order) {
    bool disjoint = true;
    for (int j : picked)
      if ((cands[i].c - cands[j].c).norm() < cands[i].r + cands[j].r) {
        disjoint = false;
        break;
      }
    if (disjoint) picked.push_back(i);
  }

  // each 5-dilate covers a stretch of the path; record the reach
  struct Sel {
    Vec<D> c;
    double r5;
    double minpar, maxpar;
  };
  std::vector<Sel> sels;
  for (int i : picked) sels.push_back({cands[i].c, 5 * cands[i].r, cands[i].param, cands[i].param});
  for (const auto& cd : cands)
    for (auto& s : sels)
      if ((cd.c - s.c).norm() <= s.r5) {
        s.minpar = std::min(s.minpar, cd.param);
        s.maxpar = std::max(s.maxpar, cd.param);
      }

  // order from the x end by furthest reach toward y
  HarnackChain<D> chain;
  chain.x = path.x();
  chain.y = path.y();
  std::vector<char> used(sels.size(), 0);
  int cur = -1;
  double total = path.length();
  for (size_t i = 0; i < sels.size(); ++i)
    if (sels[i].maxpar >= total - 1e-12 || (chain.x - sels[i].c).norm() <= sels[i].r5) {
      if (cur < 0 || sels[i].minpar < sels[cur].minpar) cur = static_cast<int>(i);
    }
  if (cur < 0) cur = 0;
  while (cur >= 0) {
    used[cur] = 1;
    chain.centers.push_back(sels[cur].c);
    chain.radii.push_back(sels[cur].r5);
    int next = -1;
    for (size_t i = 0; i < sels.size(); ++i) {
      if (used[i]) continue;
      if ((sels[i].c - sels[cur].c).norm() >= sels[i].r5 + sels[cur].r5) continue;
      if (next < 0 || sels[i].minpar < sels[next].minpar) next = static_cast<int>(i);
    }
    if (next >= 0 && sels[next].minpar >= sels[cur].minpar) break;  // no progress toward y
    cur = next;
  }
  ChainVerdict v = verify_chain(dom, chain, kInf);
  chain.C = v.min_C;
  return chain;
}

template <int D>
ChainToPathResult<D> chain_to_path(const Domain<D>& dom, const HarnackChain<D>& chain) {
  ChainToPathResult<D> res;
  res.path.vertices.push_back(chain.y);
  for (size_t i = chain.size(); i-- > 0;) res.path.vertices.push_back(chain.centers[i]);
  res.path.vertices.push_back(chain.x);
  auto v = verify_carrot(dom, res.path.vertices, 0.0);
  res.path.lambda = v.worst_ratio;

  // tail-sum bound Σ_{i >= j} r_i <= 2 C^2 r_j, checked as stated
  double C = chain.C;
  res.tail_bound_ok = true;
  double tail = 0.0;
  for (size_t j = chain.size(); j-- > 0;) {
    tail += chain.radii[j];
    double bound = 2 * C * C * chain.radii[j];
    res.tail_worst = std::max(res.tail_worst, tail / bound);
    if (tail > bound + 1e-12) res.tail_bound_ok = false;
  }
  return res;
}

namespace {

template <int D>
CarrotSearch<D> find_carrot_once(const Domain<D>& dom, const WhitneyDecomposition<D>& w,
                                 const Vec<D>& y, const Vec<D>& y_normal, const Vec<D>& x,
                                 double lambda, const CarrotSearchOptions& opt) {
  CarrotSearch<D> res;
  double r0 = opt.seed_offset > 0 ? opt.seed_offset : 4 * w.min_side;

  int target = w.locate(x);
  if (target < 0) {
    res.fail = CarrotFail::no_target;
    return res;
  }
  Vec<D> n = y_normal.norm() > 0 ? Vec<D>(y_normal.normalized()) : Vec<D>::Zero();
  Vec<D> s0 = y + r0 * n;
  int seed = w.locate(s0);
  double t = r0;
  while (seed < 0 && t <= 64 * w.min_side) {
    t *= 2;
    s0 = y + t * n;
    seed = w.locate(s0);
  }
  if (seed < 0) {
    res.fail = CarrotFail::no_seed;
    return res;
  }

  // label-correcting shortest accumulated length from the seed, pruned by the
  // gauge bound: a cube is dropped when λ L(I) > slack * 40 ℓ(I)
  const double INFD = kInf;
  std::vector<double> label(w.cubes.size(), INFD);
  std::vector<int> parent(w.cubes.size(), -1);
  using Node = std::pair<double, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
  double L0 = t + (s0 - w.cubes[seed].center()).norm();
  label[seed] = L0;
  pq.push({L0, seed});
  bool pruned = false;
  while (!pq.empty()) {
    auto [L, i] = pq.top();
    pq.pop();
    if (L > label[i]) continue;
    if (i == target) break;
    for (int j : w.cubes[i].neighbors) {
      double Lj = L + (w.cubes[i].center() - w.cubes[j].center()).norm();
      if (lambda * Lj > opt.slack * 40.0 * w.cubes[j].side) {
        pruned = true;
        continue;
      }
      if (Lj < label[j] - 1e-15) {
        label[j] = Lj;
        parent[j] = i;
        pq.push({Lj, j});
      }
    }
  }
  res.pruned = pruned;
  if (label[target] == INFD) {
    res.fail = pruned ? CarrotFail::not_found : CarrotFail::disconnected;
    return res;
  }

  std::vector<Vec<D>> rev;
  for (int c = target; c >= 0; c = parent[c]) rev.push_back(w.cubes[c].center());
  std::vector<Vec<D>> verts;
  verts.push_back(y);
  verts.push_back(s0);
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) verts.push_back(*it);
  verts.push_back(x);

  auto verdict = verify_carrot(dom, verts, lambda);
  res.lambda_achieved = verdict.worst_ratio;
  if (!verdict.ok) {
    res.fail = CarrotFail::verify_failed;
    return res;
  }
  CarrotPath<D> path;
  path.vertices = std::move(verts);
  path.lambda = lambda;
  res.path = std::move(path);
  return res;
}

}  // namespace

template <int D>
CarrotSearch<D> find_carrot(const Domain<D>& dom, const WhitneyDecomposition<D>& w,
                            const Vec<D>& y, const Vec<D>& y_normal, const Vec<D>& x,
                            double lambda, const CarrotSearchOptions& opt) {
  // The cube-level prune certifies less than the pointwise carrot bound, so
  // a shortest route may hug corners and fail verification; stricter slack
  // forces the search through roomier cubes.
  CarrotSearch<D> best;
  for (double shrink : {1.0, 1.0 / 3, 1.0 / 9}) {
    CarrotSearchOptions o = opt;
    o.slack = opt.slack * shrink;
    auto r = find_carrot_once(dom, w, y, y_normal, x, lambda, o);
    if (r.path) return r;
    if (shrink == 1.0) best = r;
    best.pruned = best.pruned || r.pruned;
    if (r.fail == CarrotFail::no_seed || r.fail == CarrotFail::no_target ||
        r.fail == CarrotFail::disconnected) {
      best.fail = r.fail;
      return best;
    }
  }
  return best;
}

template <int D>
double find_lambda_best(const Domain<D>& dom, const WhitneyDecomposition<D>& w, const Vec<D>& y,
                        const Vec<D>& y_normal, const Vec<D>& x, int iterations) {
  double lo = 0.0, hi = 1.0, best = 0.0;
  // seed with a coarse probe
  for (double l : {1e-4, 1e-3, 1e-2}) {
    auto r = find_carrot(dom, w, y, y_normal, x, l);
    if (r.path) {
      lo = l;
      best = std::max(best, r.lambda_achieved);
      break;
    }
  }
  if (lo == 0.0) return 0.0;
  for (int it = 0; it < iterations; ++it) {
    double mid = 0.5 * (lo + hi);
    auto r = find_carrot(dom, w, y, y_normal, x, mid);
    if (r.path) {
      lo = mid;
      best = std::max(best, r.lambda_achieved);
    } else {
      hi = mid;
    }
  }
  return best;
}

template <int D>
JohnScanResult<D> john_scan(const Domain<D>& dom, const Lattice<D>& lat,
                            const std::vector<BoundarySample<D>>& samples,
                            const WhitneyDecomposition<D>& w, const std::vector<Vec<D>>& xs,
                            double theta, double lambda, double N,
                            const std::vector<int>* t_q_cubes, double region_eta,
                            double region_K) {
  if (N < 2) throw std::invalid_argument("john_scan: need N >= 2");
  if (samples.size() != lat.points.size())
    throw std::invalid_argument("john_scan: lattice must be built over the given samples");
  JohnScanResult<D> res;

  // precompute regions for the T_Q map
  std::vector<WhitneyRegion<D>> regions;
  if (t_q_cubes)
    for (int Q : *t_q_cubes)
      regions.push_back(whitney_region(w, lat, Q, region_eta, region_K, w.tau0 / 2));

  int passes = 0;
  for (int xi = 0; xi < static_cast<int>(xs.size()); ++xi) {
    const Vec<D>& x = xs[xi];
    JohnPointRecord<D> rec;
    rec.x = x;
    rec.delta = dom.distance(x);
    int xc = w.locate(x);
    if (xc < 0 || !dom.inside(x)) {
      res.records.push_back(rec);
      continue;
    }

    // single-source shortest paths from x's cube
    std::vector<double> label(w.cubes.size(), kInf);
    std::vector<int> parent(w.cubes.size(), -1);
    using Node = std::pair<double, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
    label[xc] = (x - w.cubes[xc].center()).norm();
    pq.push({label[xc], xc});
    while (!pq.empty()) {
      auto [L, i] = pq.top();
      pq.pop();
      if (L > label[i]) continue;
      for (int j : w.cubes[i].neighbors) {
        double Lj = L + (w.cubes[i].center() - w.cubes[j].center()).norm();
        if (Lj < label[j] - 1e-15) {
          label[j] = Lj;
          parent[j] = i;
          pq.push({Lj, j});
        }
      }
    }

    std::vector<char> reachable_sample(samples.size(), 0);
    double window = N * rec.delta;
    for (size_t si = 0; si < samples.size(); ++si) {
      const auto& s = samples[si];
      double dy = (s.point - x).norm();
      if (dy > window) continue;
      rec.sigma_window += s.weight;
      // candidate path: x -> tree -> seed cube -> s0 -> y, reversed
      double r0 = 4 * w.min_side;
      Vec<D> s0 = s.point + r0 * s.normal;
      int seed = w.locate(s0);
      double tt = r0;
      while (seed < 0 && tt <= 16 * w.min_side) {
        tt *= 2;
        s0 = s.point + tt * s.normal;
        seed = w.locate(s0);
      }
      if (seed < 0 || label[seed] == kInf) continue;
      std::vector<Vec<D>> verts;
      verts.push_back(s.point);
      verts.push_back(s0);
      for (int c = seed; c >= 0; c = parent[c]) verts.push_back(w.cubes[c].center());
      verts.push_back(x);
      auto verdict = verify_carrot(dom, verts, lambda);
      if (verdict.ok) {
        rec.sigma_F += s.weight;
        ++rec.reachable;
        reachable_sample[si] = 1;
      }
    }
    rec.pass = rec.reachable > 0 && rec.sigma_F >= theta * rec.sigma_window;
    if (rec.pass) ++passes;

    if (t_q_cubes) {
      for (size_t qi = 0; qi < t_q_cubes->size(); ++qi) {
        int Q = (*t_q_cubes)[qi];
        if (!region_contains(w, regions[qi], x)) continue;
        double mass = 0.0;
        for (int s : lat.members_of[Q])
          if (s < static_cast<int>(reachable_sample.size()) && reachable_sample[s])
            mass += lat.weights[s];
        if (mass >= theta * lat.cubes[Q].sigma)
          res.t_q_members.push_back({xi, Q});
      }
    }
    res.records.push_back(rec);
  }
  res.pass_fraction = xs.empty() ? 0.0 : static_cast<double>(passes) / xs.size();
  return res;
}

template <int D>
WsbcResult<D> wsbc_test(const Domain<D>& dom, const Lattice<D>& lat,
                        const WhitneyDecomposition<D>& w, int Q, double Gamma, double eps_flat,
                        double C4, double ball_multiplier, const SetDistance<D>& set_distance) {
  WsbcResult<D> res;
  auto flat = bbeta_cube(lat, Q, ball_multiplier, {}, set_distance);
  res.bbeta_value = flat.bbeta;
  if (flat.bbeta > C4 * eps_flat) return res;  // not applicable
  res.applicable = true;

  double rBQ = 4.0 * lat.ell_of(Q);
  Vec<D> xQ = lat.center_of(Q);
  Vec<D> base = xQ - (xQ.dot(flat.normal) - flat.offset) * flat.normal;
  res.z1 = base + 0.5 * rBQ * flat.normal;
  res.z2 = base - 0.5 * rBQ * flat.normal;

  int c1 = w.locate(res.z1), c2 = w.locate(res.z2);
  if (c1 < 0 || c2 < 0) {
    res.wsbc = true;  // no route at this resolution (one-sided)
    return res;
  }

  // Chain search over cubes above a clearance floor.  Edge costs count
  // scale-relative steps with a superlinear reward for coarse cubes, so
  // routes climb ladder-style instead of hugging the boundary; the growth
  // condition of the verified chain then scales like the distance to the
  // nearest connection hole over ℓ(Q), which is the separation the verdict
  // keys on.
  for (double floor_frac : {1.0 / 64, 1.0 / 16, 1.0 / 4, 1.0}) {
    double floor_side = floor_frac * lat.ell_of(Q);
    std::vector<double> label(w.cubes.size(), kInf);
    std::vector<int> parent(w.cubes.size(), -1);
    using Node = std::pair<double, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
    if (w.cubes[c1].side < floor_side) continue;
    label[c1] = 0.0;
    pq.push({0.0, c1});
    while (!pq.empty()) {
      auto [L, i] = pq.top();
      pq.pop();
      if (L > label[i]) continue;
      if (i == c2) break;
      for (int j : w.cubes[i].neighbors) {
        if (w.cubes[j].side < floor_side) continue;
        double Lj = L + (w.cubes[i].center() - w.cubes[j].center()).norm() /
                            std::pow(w.cubes[j].side, 1.5);
        if (Lj < label[j] - 1e-15) {
          label[j] = Lj;
          parent[j] = i;
          pq.push({Lj, j});
        }
      }
    }
    if (label[c2] == kInf) continue;
    HarnackChain<D> chain;
    chain.x = res.z1;
    chain.y = res.z2;
    std::vector<int> rev;
    for (int c = c2; c >= 0; c = parent[c]) rev.push_back(c);
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
      chain.centers.push_back(w.cubes[*it].center());
      // 4x the side keeps both depth ratios of the gauge window small
      chain.radii.push_back(4.0 * w.cubes[*it].side);
    }
    auto v = verify_chain(dom, chain, kInf);
    if (v.consecutive_ok && (chain.x - chain.centers.front()).norm() <= chain.radii.front() &&
        (chain.y - chain.centers.back()).norm() <= chain.radii.back())
      res.best_chain_C = std::min(res.best_chain_C, v.min_C);
  }
  res.wsbc = res.best_chain_C > Gamma;
  return res;
}

template <int D>
CigarVerdict<D> cigar_check(const Domain<D>& dom, const std::vector<Vec<D>>& vertices, double M) {
  CigarVerdict<D> v;
  double total = 0.0;
  for (size_t i = 0; i + 1 < vertices.size(); ++i) total += (vertices[i + 1] - vertices[i]).norm();
  double worst = 0.0;
  densify(dom, vertices, [&](const Vec<D>& z, double L) {
    double lhs = std::min(L, total - L);
    double d = dom.distance(z);
    if (d > 0) worst = std::max(worst, lhs / d);
  });
  v.worst_M = worst;
  v.ok = worst <= M;
  return v;
}

template <int D>
std::string path_to_json(const CarrotPath<D>& path) {
  nlohmann::json j;
  j["lambda"] = path.lambda;
  auto verts = nlohmann::json::array();
  for (const auto& p : path.vertices) {
    std::vector<double> v(D);
    for (int a = 0; a < D; ++a) v[a] = p[a];
    verts.push_back(v);
  }
  j["vertices"] = verts;
  return j.dump();
}

template <int D>
std::string chain_to_json(const HarnackChain<D>& chain) {
  nlohmann::json j;
  j["C"] = chain.C;
  auto balls = nlohmann::json::array();
  for (size_t i = 0; i < chain.size(); ++i) {
    nlohmann::json b;
    std::vector<double> c(D);
    for (int a = 0; a < D; ++a) c[a] = chain.centers[i][a];
    b["center"] = c;
    b["radius"] = chain.radii[i];
    balls.push_back(b);
  }
  j["balls"] = balls;
  return j.dump();
}

template <int D>
std::string john_scan_csv(const JohnScanResult<D>& result) {
  std::ostringstream os;
  os.precision(12);
  os << (D == 2 ? "x,y" : "x,y,z") << ",delta,sigma_window,sigma_F,pass\n";
  for (const auto& r : result.records) {
    for (int a = 0; a < D; ++a) os << r.x[a] << ",";
    os << r.delta << "," << r.sigma_window << "," << r.sigma_F << "," << (r.pass ? 1 : 0) << "\n";
  }
  return os.str();
}

#define QC_INSTANTIATE(D)                                                                         \
  template CarrotVerdict<D> verify_carrot<D>(const Domain<D>&, const std::vector<Vec<D>>&,        \
                                             double);                                            \
  template ChainVerdict verify_chain<D>(const Domain<D>&, const HarnackChain<D>&, double);        \
  template HarnackChain<D> path_to_chain<D>(const Domain<D>&, const CarrotPath<D>&);              \
  template ChainToPathResult<D> chain_to_path<D>(const Domain<D>&, const HarnackChain<D>&);       \
  template CarrotSearch<D> find_carrot<D>(const Domain<D>&, const WhitneyDecomposition<D>&,       \
                                          const Vec<D>&, const Vec<D>&, const Vec<D>&, double,    \
                                          const CarrotSearchOptions&);                            \
  template double find_lambda_best<D>(const Domain<D>&, const WhitneyDecomposition<D>&,           \
                                      const Vec<D>&, const Vec<D>&, const Vec<D>&, int);          \
  template JohnScanResult<D> john_scan<D>(const Domain<D>&, const Lattice<D>&,                    \
                                          const std::vector<BoundarySample<D>>&,                 \
                                          const WhitneyDecomposition<D>&,                        \
                                          const std::vector<Vec<D>>&, double, double, double,    \
                                          const std::vector<int>*, double, double);              \
  template WsbcResult<D> wsbc_test<D>(const Domain<D>&, const Lattice<D>&,                        \
                                      const WhitneyDecomposition<D>&, int, double, double,        \
                                      double, double, const SetDistance<D>&);                     \
  template CigarVerdict<D> cigar_check<D>(const Domain<D>&, const std::vector<Vec<D>>&, double);  \
  template std::string path_to_json<D>(const CarrotPath<D>&);                                     \
  template std::string chain_to_json<D>(const HarnackChain<D>&);                                  \
  template std::string john_scan_csv<D>(const JohnScanResult<D>&);

QC_INSTANTIATE(2)
QC_INSTANTIATE(3)
#undef QC_INSTANTIATE

}  // namespace qc
