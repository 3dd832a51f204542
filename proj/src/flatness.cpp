#include "quantconn/flatness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "quantconn/harmonic.hpp"  // worker_count

namespace qc {

namespace {
constexpr double kPi = std::numbers::pi;

template <int D>
struct PlaneScore {
  double value = kInf;
  Vec<D> normal = Vec<D>::Zero();
  double offset = 0.0;
};

/// Objective for a fixed plane {y : y·n = c}.
template <int D>
double plane_objective(const std::vector<Vec<D>>& pts, const SpatialGrid<D>& grid,
                       const std::vector<int>& in_ball, const Vec<D>& center, double r,
                       const Vec<D>& n, double c, int chord_points,
                       const SetDistance<D>& set_distance) {
  double sup_set = 0.0;
  for (int i : in_ball) sup_set = std::max(sup_set, std::abs(pts[i].dot(n) - c));
  // chord/disk of the plane inside the ball
  double h = c - center.dot(n);
  double w2 = r * r - h * h;
  if (w2 <= 0) return kInf;  // plane must meet the ball
  double w = std::sqrt(w2);
  Vec<D> base = center + h * n;
  double sup_plane = 0.0;
  if constexpr (D == 2) {
    Vec<2> t(-n[1], n[0]);
    for (int j = 0; j < chord_points; ++j) {
      double s = (2.0 * j / (chord_points - 1) - 1.0) * w;
      Vec<2> z = base + s * t;
      sup_plane = std::max(sup_plane, set_distance ? set_distance(z) : grid.nearest_dist(z));
    }
  } else {
    // orthonormal frame of the plane
    Vec<3> a = std::abs(n[0]) < 0.9 ? Vec<3>(1, 0, 0) : Vec<3>(0, 1, 0);
    Vec<3> u = (a - a.dot(n) * n).normalized();
    Vec<3> v = n.cross(u);
    int nr = 6, na = std::max(8, chord_points / 8);
    for (int ir = 0; ir <= nr; ++ir)
      for (int ia = 0; ia < na; ++ia) {
        double rho = w * ir / nr;
        double th = 2 * kPi * ia / na;
        Vec<3> z = base + rho * (std::cos(th) * u + std::sin(th) * v);
        sup_plane = std::max(sup_plane, set_distance ? set_distance(z) : grid.nearest_dist(z));
      }
  }
  return (sup_set + sup_plane) / r;
}

template <int D>
Vec<D> unit_from_angles(const double* ang);

template <>
Vec<2> unit_from_angles<2>(const double* ang) {
  return {std::cos(ang[0]), std::sin(ang[0])};
}
template <>
Vec<3> unit_from_angles<3>(const double* ang) {
  double ct = std::cos(ang[1]), st = std::sin(ang[1]);
  return {st * std::cos(ang[0]), st * std::sin(ang[0]), ct};
}

}  // namespace

template <int D>
FlatnessRecord<D> bbeta_local(const std::vector<Vec<D>>& pts, const SpatialGrid<D>& grid,
                              const std::vector<int>& in_ball, const Vec<D>& center, double radius,
                              const BbetaOptions& opt, const SetDistance<D>& set_distance);

template <int D>
FlatnessRecord<D> bbeta(const std::vector<Vec<D>>& pts, const SpatialGrid<D>& grid,
                        const Vec<D>& center, double radius, const BbetaOptions& opt,
                        const SetDistance<D>& set_distance) {
  // Work on a ball-local copy with cells scaled to the radius: any sample
  // relevant to dist(·, E) from inside B lies within 3r of the center.
  std::vector<Vec<D>> local;
  std::vector<int> in_ball;
  grid.for_each_within(center, 3 * radius, [&](int i) {
    if ((pts[i] - center).norm() <= radius) in_ball.push_back(static_cast<int>(local.size()));
    local.push_back(pts[i]);
  });
  if (in_ball.empty()) throw std::invalid_argument("bbeta: ball misses the sample set");
  SpatialGrid<D> local_grid;
  local_grid.build(local, radius / 8);
  return bbeta_local<D>(local, local_grid, in_ball, center, radius, opt, set_distance);
}

template <int D>
FlatnessRecord<D> bbeta_local(const std::vector<Vec<D>>& pts, const SpatialGrid<D>& grid,
                              const std::vector<int>& in_ball, const Vec<D>& center, double radius,
                              const BbetaOptions& opt, const SetDistance<D>& set_distance) {

  // PCA seed: least-variance direction of the in-ball samples.
  Vec<D> mean = Vec<D>::Zero();
  for (int i : in_ball) mean += pts[i];
  mean /= static_cast<double>(in_ball.size());
  Eigen::Matrix<double, D, D> cov = Eigen::Matrix<double, D, D>::Zero();
  for (int i : in_ball) {
    Vec<D> d = pts[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, D, D>> eig(cov);
  Vec<D> pca_normal = eig.eigenvectors().col(0);

  auto eval = [&](const Vec<D>& n, double c) {
    return plane_objective<D>(pts, grid, in_ball, center, radius, n, c, opt.chord_points,
                              set_distance);
  };

  PlaneScore<D> best;
  auto consider = [&](const Vec<D>& n, double c) {
    double v = eval(n, c);
    if (v < best.value) best = {v, n, c};
  };
  auto accepted = [&] { return opt.early_accept >= 0 && best.value <= opt.early_accept; };
  auto finish = [&](double resolution) {
    FlatnessRecord<D> rec;
    rec.bbeta = best.value;
    rec.normal = best.normal;
    rec.offset = best.offset;
    rec.ball_center = center;
    rec.ball_radius = radius;
    rec.resolution = resolution;
    return rec;
  };

  // PCA candidates: through the weighted mean and through the center.
  consider(pca_normal, mean.dot(pca_normal));
  consider(pca_normal, center.dot(pca_normal));
  if (accepted()) return finish(2.0 * (2.0 * radius) / radius);  // coarse bound

  const int na = opt.angle_grid, nc = opt.offset_grid;
  double ang_lo[2] = {0.0, 0.0}, ang_hi[2] = {kPi, kPi};
  double off_lo = -radius, off_hi = radius;  // offset relative to center·n
  double ang_best[2] = {0.0, 0.0};
  if constexpr (D == 2) ang_best[0] = std::atan2(pca_normal[1], pca_normal[0]);

  for (int round = 0; round <= opt.refine_rounds; ++round) {
    PlaneScore<D> round_best = best;
    double a_best[2] = {ang_best[0], ang_best[1]};
    int na_r = round == 0 ? na : std::max(8, na / 3);
    int nc_r = round == 0 ? nc : std::max(8, nc / 2);
    auto scan_offsets = [&](const Vec<D>& n, double alo, double ahi, const double* angs) {
      for (int jc = 0; jc <= nc_r; ++jc) {
        double c = n.dot(center) + off_lo + (off_hi - off_lo) * jc / nc_r;
        double v = eval(n, c);
        if (v < round_best.value) {
          round_best = {v, n, c};
          a_best[0] = angs[0];
          a_best[1] = angs[1];
        }
      }
      (void)alo;
      (void)ahi;
    };
    if constexpr (D == 2) {
      for (int ja = 0; ja < na_r; ++ja) {
        double ang[2] = {ang_lo[0] + (ang_hi[0] - ang_lo[0]) * ja / na_r, 0.0};
        scan_offsets(unit_from_angles<2>(ang), ang_lo[0], ang_hi[0], ang);
      }
    } else {
      int nb = std::max(6, na_r / 4);
      for (int ja = 0; ja < na_r; ++ja)
        for (int jb = 0; jb <= nb; ++jb) {
          double ang[2] = {ang_lo[0] + (ang_hi[0] - ang_lo[0]) * ja / na_r,
                           ang_lo[1] + (ang_hi[1] - ang_lo[1]) * jb / nb};
          scan_offsets(unit_from_angles<3>(ang), 0, 0, ang);
        }
    }
    best = round_best;
    ang_best[0] = a_best[0];
    ang_best[1] = a_best[1];
    if (accepted()) return finish(2.0 * (2.0 * radius) / radius);
    // shrink the search window around the best plane
    double ang_span = (ang_hi[0] - ang_lo[0]) / na_r * 2.0;
    double off_span = (off_hi - off_lo) / nc_r * 2.0;
    ang_lo[0] = ang_best[0] - ang_span;
    ang_hi[0] = ang_best[0] + ang_span;
    ang_lo[1] = std::max(0.0, ang_best[1] - ang_span);
    ang_hi[1] = std::min(kPi, ang_best[1] + ang_span);
    double c_rel = best.offset - best.normal.dot(center);
    off_lo = std::max(-radius, c_rel - off_span);
    off_hi = std::min(radius, c_rel + off_span);
  }

  // Lipschitz resolution bound: rotating by the final angle step moves plane
  // distances by at most 2r dθ, shifting offsets moves them by dc, and the
  // chord sampling can miss peaks by half its spacing.
  double dth = (ang_hi[0] - ang_lo[0]) / std::max(8, na / 3);
  double dc = (off_hi - off_lo) / std::max(8, nc / 2);
  double chord_step = 2.0 * radius / (opt.chord_points - 1);
  return finish((2 * radius * dth + dc + 0.5 * chord_step) / radius);
}

template <int D>
FlatnessRecord<D> bbeta(const std::vector<BoundarySample<D>>& samples, const Vec<D>& center,
                        double radius, const BbetaOptions& opt,
                        const SetDistance<D>& set_distance) {
  std::vector<Vec<D>> pts(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) pts[i] = samples[i].point;
  SpatialGrid<D> grid;
  Vec<D> lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  grid.build(pts, std::max((hi - lo).norm() / 64.0, radius / 32.0));
  return bbeta<D>(pts, grid, center, radius, opt, set_distance);
}

template <int D>
FlatnessRecord<D> bbeta_cube(const Lattice<D>& lat, int cube, double ball_multiplier,
                             const BbetaOptions& opt, const SetDistance<D>& set_distance) {
  Vec<D> c = lat.center_of(cube);
  double r = ball_multiplier * 4.0 * lat.ell_of(cube);
  return bbeta<D>(lat.points, lat.grid(), c, r, opt, set_distance);
}

namespace {

template <int D>
void parallel_bbeta(const Lattice<D>& lat, const std::vector<int>& cubes, double multiplier,
                    const BbetaOptions& opt, const SetDistance<D>& set_distance,
                    std::map<int, double>& out) {
  std::vector<double> vals(cubes.size());
  std::atomic<size_t> next{0};
  int workers = worker_count(WosConfig{});
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < cubes.size(); i = next.fetch_add(1))
      vals[i] = bbeta_cube(lat, cubes[i], multiplier, opt, set_distance).bbeta;
  };
  if (workers <= 1 || cubes.size() < 8) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (size_t i = 0; i < cubes.size(); ++i) out[cubes[i]] = vals[i];
}

template <int D>
std::vector<int> descendants(const Lattice<D>& lat, int R, int max_depth) {
  std::vector<int> out;
  std::vector<int> stack{R};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    out.push_back(c);
    if (max_depth >= 0 && lat.cubes[c].level - lat.cubes[R].level >= max_depth) continue;
    for (int ch : lat.cubes[c].children) stack.push_back(ch);
  }
  return out;
}

}  // namespace

template <int D>
PackingProfile ur_packing(const Lattice<D>& lat, int R, double eps, double ball_multiplier,
                          int max_depth, const BbetaOptions& opt,
                          const SetDistance<D>& set_distance) {
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("ur_packing: eps must be in (0,1)");
  PackingProfile prof;
  prof.eps = eps;
  prof.ball_multiplier = ball_multiplier;
  int base = lat.cubes[R].level;
  int depth_cap = max_depth >= 0 ? max_depth : lat.depth - base;
  auto cubes = descendants(lat, R, depth_cap);
  cubes.erase(std::remove(cubes.begin(), cubes.end(), R), cubes.end());
  BbetaOptions o = opt;
  if (o.early_accept < 0) o.early_accept = eps;  // deciding bβ <= ε is enough
  parallel_bbeta(lat, cubes, ball_multiplier, o, set_distance, prof.bbeta_of);

  prof.ratio_at_depth.assign(depth_cap + 1, 0.0);
  for (int c : cubes) {
    int d = lat.cubes[c].level - base;
    if (prof.bbeta_of[c] > eps) prof.ratio_at_depth[d] += lat.cubes[c].sigma;
  }
  double sigma_R = lat.cubes[R].sigma;
  for (int d = 1; d <= depth_cap; ++d)
    prof.ratio_at_depth[d] = prof.ratio_at_depth[d] / sigma_R + prof.ratio_at_depth[d - 1];
  return prof;
}

template <int D>
CoronaDecomposition build_corona(const Lattice<D>& lat, int R0, double eps,
                                 const std::vector<char>* good, double ball_multiplier,
                                 const BbetaOptions& opt, const SetDistance<D>& set_distance) {
  CoronaDecomposition cor;
  cor.eps = eps;
  auto is_good = [&](int c) { return good ? (*good)[c] != 0 : true; };

  // bβ for every cube below R0 that can appear as a parent in the stop rule
  auto all = descendants(lat, R0, -1);
  BbetaOptions o = opt;
  if (o.early_accept < 0) o.early_accept = eps;
  parallel_bbeta(lat, all, ball_multiplier, o, set_distance, cor.bbeta_of);

  std::vector<int> queue{R0};
  std::set<int> tops;
  while (!queue.empty()) {
    int R = queue.back();
    queue.pop_back();
    if (tops.count(R)) continue;
    tops.insert(R);
    cor.top.push_back(R);
    auto& stops = cor.stop[R];
    auto& tree = cor.tree[R];
    std::vector<int> stack{R};
    while (!stack.empty()) {
      int q = stack.back();
      stack.pop_back();
      tree.push_back(q);
      for (int ch : lat.cubes[q].children) {
        bool stop_not_good = !is_good(ch);
        bool stop_flat_break = cor.bbeta_of[q] > eps;  // q is the parent of ch
        if (stop_not_good || stop_flat_break) {
          stops.push_back(ch);
          cor.stopped_reason[ch] = stop_not_good ? "not-good" : "flat-break";
          if (!stop_not_good) queue.push_back(ch);  // Top_{k+1} = Stop(R) ∩ G
        } else {
          stack.push_back(ch);
        }
      }
    }
    std::sort(stops.begin(), stops.end());
    std::sort(tree.begin(), tree.end());
  }
  std::sort(cor.top.begin(), cor.top.end());
  for (int R : cor.top) cor.packing_sum += lat.cubes[R].sigma;
  cor.packing_ratio = cor.packing_sum / lat.cubes[R0].sigma;
  return cor;
}

std::vector<int> corona_bad_family(const CoronaDecomposition& corona) {
  std::set<int> fam(corona.top.begin(), corona.top.end());
  for (const auto& [R, stops] : corona.stop)
    for (int q : stops)
      if (corona.stopped_reason.at(q) == "not-good") fam.insert(q);
  return {fam.begin(), fam.end()};
}

template <int D>
PackingMeasure packing_measure(const Lattice<D>& lat, int R, const std::vector<int>& bad_family) {
  PackingMeasure pm;
  pm.alpha.assign(lat.cubes.size(), 0.0);
  std::vector<char> bad(lat.cubes.size(), 0);
  for (int b : bad_family) bad[b] = 1;
  // α_Q = σ(Q) iff some member of D_*(Q) = {Q, children, grandchildren} is bad
  for (const auto& c : lat.cubes) {
    bool hit = bad[c.id] != 0;
    for (int ch : c.children) {
      hit = hit || bad[ch];
      for (int gr : lat.cubes[ch].children) hit = hit || bad[gr];
    }
    if (hit) pm.alpha[c.id] = c.sigma;
  }
  // subtree sums below R, deepest level first
  std::vector<double> sub(lat.cubes.size(), 0.0);
  auto below = descendants(lat, R, -1);
  std::sort(below.begin(), below.end(),
            [&](int a, int b) { return lat.cubes[a].level > lat.cubes[b].level; });
  for (int c : below) {
    sub[c] = pm.alpha[c];
    for (int ch : lat.cubes[c].children) sub[c] += sub[ch];
  }
  pm.m_total = sub[R];
  for (int c : below)
    if (lat.cubes[c].sigma > 0)
      pm.carleson_norm = std::max(pm.carleson_norm, sub[c] / lat.cubes[c].sigma);
  return pm;
}

template <int D>
CarlesonExtract carleson_extract(const Lattice<D>& lat, int Q, const std::vector<double>& alpha,
                                 double a, double b) {
  if (alpha.size() != lat.cubes.size())
    throw std::invalid_argument("carleson_extract: alpha must cover every cube");
  if (!(b > 0) || a < 0) throw std::invalid_argument("carleson_extract: need a >= 0, b > 0");
  auto below = descendants(lat, Q, -1);
  std::sort(below.begin(), below.end(),
            [&](int x, int y) { return lat.cubes[x].level > lat.cubes[y].level; });
  std::vector<double> sub(lat.cubes.size(), 0.0);
  for (int c : below) {
    sub[c] = alpha[c];
    for (int ch : lat.cubes[c].children) sub[c] += sub[ch];
  }
  if (sub[Q] > (a + b) * lat.cubes[Q].sigma + 1e-12)
    throw std::invalid_argument("carleson_extract: precondition m(D(Q)) <= (a+b) sigma(Q) fails");

  CarlesonExtract ex;
  // top-down maximal cubes with subtree mass >= b σ
  std::vector<int> stack;
  for (int ch : lat.cubes[Q].children) stack.push_back(ch);
  std::vector<char> in_F(lat.cubes.size(), 0);
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    if (sub[c] >= b * lat.cubes[c].sigma) {
      ex.F.push_back(c);
      in_F[c] = 1;
      continue;
    }
    for (int ch : lat.cubes[c].children) stack.push_back(ch);
  }
  std::sort(ex.F.begin(), ex.F.end());
  for (int c : ex.F)
    if (sub[c] - alpha[c] > a * lat.cubes[c].sigma) ex.F_bad.push_back(c);

  // restricted measure m_F: zero out everything under F
  std::vector<char> under(lat.cubes.size(), 0);
  {
    std::vector<int> order = below;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return lat.cubes[x].level < lat.cubes[y].level; });
    for (int c : order) {
      int p = lat.cubes[c].parent;
      under[c] = in_F[c] || (p >= 0 && c != Q && under[p]);
    }
  }
  std::vector<double> subF(lat.cubes.size(), 0.0);
  for (int c : below) {
    subF[c] = under[c] ? 0.0 : alpha[c];
    for (int ch : lat.cubes[c].children) subF[c] += under[ch] ? 0.0 : subF[ch];
  }
  for (int c : below)
    if (lat.cubes[c].sigma > 0 && !under[c])
      ex.norm_mF = std::max(ex.norm_mF, subF[c] / lat.cubes[c].sigma);
  ex.achieved_C = ex.norm_mF / b;
  for (int c : ex.F_bad) ex.bad_sigma += lat.cubes[c].sigma;
  ex.bad_bound = (a + b) / (a + 2 * b) * lat.cubes[Q].sigma;
  ex.bad_ok = ex.bad_sigma <= ex.bad_bound + 1e-12;
  return ex;
}

template <int D>
EndFamily regularize_end(const Lattice<D>& lat, int R, const std::vector<int>& tree) {
  // semi-coherence: R is the top and every cube's ancestors stay in the tree
  std::set<int> T(tree.begin(), tree.end());
  if (!T.count(R)) throw std::invalid_argument("regularize_end: R must belong to the tree");
  for (int q : tree) {
    int c = q;
    while (c != R) {
      c = lat.cubes[c].parent;
      if (c < 0 || (c != R && !T.count(c)))
        throw std::invalid_argument("regularize_end: tree is not semi-coherent");
      if (c == R) break;
    }
  }

  EndFamily ef;
  int n = static_cast<int>(lat.points.size());
  // d_R per sample: min over levels of ( ℓ(level) + dist to T-samples at level )
  ef.d_R.assign(n, kInf);
  std::vector<std::vector<Vec<D>>> level_pts(lat.depth + 1);
  for (int q : tree) {
    int k = lat.cubes[q].level;
    for (int s : lat.members_of[q]) level_pts[k].push_back(lat.points[s]);
  }
  for (int k = 0; k <= lat.depth; ++k) {
    if (level_pts[k].empty()) continue;
    SpatialGrid<D> g;
    g.build(level_pts[k], std::max(lat.ell(k) / 4, 1e-12 * lat.ell0));
    for (int s = 0; s < n; ++s)
      ef.d_R[s] = std::min(ef.d_R[s], lat.ell(k) + g.nearest_dist(lat.points[s]));
  }

  // per-cube inf of d_R over members
  std::vector<double> inf_dR(lat.cubes.size(), kInf);
  for (const auto& c : lat.cubes)
    for (int s : lat.members_of[c.id]) inf_dR[c.id] = std::min(inf_dR[c.id], ef.d_R[s]);

  // largest admissible cube per sample; clamp at the floor when none fits
  std::set<int> emitted;
  std::vector<char> clamped_flag;
  for (int s = 0; s < n; ++s) {
    int chosen = -1;
    bool clamp = false;
    for (int k = 0; k <= lat.depth; ++k) {
      int c = lat.cube_of[k][s];
      if (lat.ell(k) <= inf_dR[c] / 300.0) {
        chosen = c;
        break;
      }
    }
    if (chosen < 0) {
      chosen = lat.cube_of[lat.depth][s];
      clamp = true;
    }
    if (!emitted.count(chosen)) {
      emitted.insert(chosen);
      ef.cubes.push_back(chosen);
      clamped_flag.push_back(clamp);
    }
  }
  ef.clamped = clamped_flag;

  // antichain check (maximality makes nested picks impossible)
  for (int cpt : ef.cubes) {
    int up = lat.cubes[cpt].parent;
    while (up >= 0) {
      if (emitted.count(up)) throw std::logic_error("regularize_end: nested End cubes");
      up = lat.cubes[up].parent;
    }
  }

  // certificates
  for (size_t i = 0; i < ef.cubes.size(); ++i) {
    int P = ef.cubes[i];
    if (ef.clamped[i]) continue;  // floor-clamped cubes carry no certificate
    double ellP = lat.ell_of(P);
    Vec<D> xP = lat.center_of(P);
    lat.grid().for_each_within(xP, 200.0 * ellP, [&](int s) {
      double ratio = ef.d_R[s] / ellP;
      ef.cert_a_lo = std::min(ef.cert_a_lo, ratio);
      ef.cert_a_hi = std::max(ef.cert_a_hi, ratio);
      if (ratio < 100.0 - 1e-9 || ratio > 900.0 + 1e-9) ef.cert_a_ok = false;
    });
  }
  for (size_t i = 0; i < ef.cubes.size(); ++i) {
    int P = ef.cubes[i];
    double ellP = lat.ell_of(P);
    Vec<D> xP = lat.center_of(P);
    int overlaps = 0;
    for (size_t j = 0; j < ef.cubes.size(); ++j) {
      int Pp = ef.cubes[j];
      double ellPp = lat.ell_of(Pp);
      if ((xP - lat.center_of(Pp)).norm() <= 200.0 * (ellP + ellPp)) {
        ++overlaps;
        if (i != j)
          ef.cert_b_ratio = std::max(ef.cert_b_ratio, std::max(ellP / ellPp, ellPp / ellP));
      }
    }
    ef.cert_c_overlap = std::max(ef.cert_c_overlap, overlaps);
  }
  // (d): End cubes near R are covered by a moderate tree cube
  double ellR = lat.ell_of(R);
  Vec<D> xR = lat.center_of(R);
  for (size_t i = 0; i < ef.cubes.size(); ++i) {
    int P = ef.cubes[i];
    if (ef.clamped[i]) continue;
    double dPR = kInf;
    for (int s : lat.members_of[P])
      for (int t : lat.members_of[R]) dPR = std::min(dPR, (lat.points[s] - lat.points[t]).norm());
    if (dPR > 20.0 * ellR) continue;
    double ellP = lat.ell_of(P);
    bool found = false;
    for (int q : tree) {
      double ellQ = lat.ell_of(q);
      if (ellQ > 2000.0 * ellP) continue;
      bool inside = true;
      for (int s : lat.members_of[P]) {
        double d = kInf;
        for (int t : lat.members_of[q]) d = std::min(d, (lat.points[s] - lat.points[t]).norm());
        if (d > 21.0 * ellQ) {
          inside = false;
          break;
        }
      }
      if (inside) {
        found = true;
        break;
      }
    }
    if (!found) ef.cert_d_ok = false;
  }
  (void)xR;
  return ef;
}

template <int D>
std::string corona_to_json(const Lattice<D>& lat, const CoronaDecomposition& corona,
                           const PackingMeasure* pm) {
  nlohmann::json forest = nlohmann::json::array();
  for (int R : corona.top) {
    nlohmann::json jr;
    jr["root"] = R;
    jr["sigma"] = lat.cubes[R].sigma;
    nlohmann::json cubes = nlohmann::json::array();
    for (int q : corona.tree.at(R)) {
      nlohmann::json jq;
      jq["id"] = q;
      jq["level"] = lat.cubes[q].level;
      auto itb = corona.bbeta_of.find(q);
      if (itb != corona.bbeta_of.end()) jq["bbeta"] = itb->second;
      if (pm) jq["alpha"] = pm->alpha[q];
      auto its = corona.stopped_reason.find(q);
      if (its != corona.stopped_reason.end()) jq["stopped_reason"] = its->second;
      cubes.push_back(jq);
    }
    jr["tree"] = cubes;
    nlohmann::json stops = nlohmann::json::array();
    for (int q : corona.stop.at(R)) stops.push_back(q);
    jr["stop"] = stops;
    forest.push_back(jr);
  }
  nlohmann::json out;
  out["eps"] = corona.eps;
  out["packing_ratio"] = corona.packing_ratio;
  out["forest"] = forest;
  return out.dump();
}

std::string packing_to_csv(const PackingProfile& profile) {
  std::ostringstream os;
  os.precision(12);
  os << "depth,ratio\n";
  for (size_t d = 1; d < profile.ratio_at_depth.size(); ++d)
    os << d << "," << profile.ratio_at_depth[d] << "\n";
  return os.str();
}

// explicit instantiations
template FlatnessRecord<2> bbeta<2>(const std::vector<Vec<2>>&, const SpatialGrid<2>&,
                                    const Vec<2>&, double, const BbetaOptions&,
                                    const SetDistance<2>&);
template FlatnessRecord<3> bbeta<3>(const std::vector<Vec<3>>&, const SpatialGrid<3>&,
                                    const Vec<3>&, double, const BbetaOptions&,
                                    const SetDistance<3>&);
template FlatnessRecord<2> bbeta<2>(const std::vector<BoundarySample<2>>&, const Vec<2>&, double,
                                    const BbetaOptions&, const SetDistance<2>&);
template FlatnessRecord<3> bbeta<3>(const std::vector<BoundarySample<3>>&, const Vec<3>&, double,
                                    const BbetaOptions&, const SetDistance<3>&);
template FlatnessRecord<2> bbeta_cube<2>(const Lattice<2>&, int, double, const BbetaOptions&,
                                         const SetDistance<2>&);
template FlatnessRecord<3> bbeta_cube<3>(const Lattice<3>&, int, double, const BbetaOptions&,
                                         const SetDistance<3>&);
template PackingProfile ur_packing<2>(const Lattice<2>&, int, double, double, int,
                                      const BbetaOptions&, const SetDistance<2>&);
template PackingProfile ur_packing<3>(const Lattice<3>&, int, double, double, int,
                                      const BbetaOptions&, const SetDistance<3>&);
template CoronaDecomposition build_corona<2>(const Lattice<2>&, int, double,
                                             const std::vector<char>*, double, const BbetaOptions&,
                                             const SetDistance<2>&);
template CoronaDecomposition build_corona<3>(const Lattice<3>&, int, double,
                                             const std::vector<char>*, double, const BbetaOptions&,
                                             const SetDistance<3>&);
template PackingMeasure packing_measure<2>(const Lattice<2>&, int, const std::vector<int>&);
template PackingMeasure packing_measure<3>(const Lattice<3>&, int, const std::vector<int>&);
template CarlesonExtract carleson_extract<2>(const Lattice<2>&, int, const std::vector<double>&,
                                             double, double);
template CarlesonExtract carleson_extract<3>(const Lattice<3>&, int, const std::vector<double>&,
                                             double, double);
template EndFamily regularize_end<2>(const Lattice<2>&, int, const std::vector<int>&);
template EndFamily regularize_end<3>(const Lattice<3>&, int, const std::vector<int>&);
template std::string corona_to_json<2>(const Lattice<2>&, const CoronaDecomposition&,
                                       const PackingMeasure*);
template std::string corona_to_json<3>(const Lattice<3>&, const CoronaDecomposition&,
                                       const PackingMeasure*);

}  // namespace qc
