#include "quantconn/harmonic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <thread>

namespace qc {

namespace {
constexpr double kPi = std::numbers::pi;

template <int D>
Vec<D> random_unit(RngStream& rng) {
  if constexpr (D == 2) {
    double th = 2 * kPi * rng.uniform();
    return {std::cos(th), std::sin(th)};
  } else {
    double z = 2 * rng.uniform() - 1;
    double phi = 2 * kPi * rng.uniform();
    double r = std::sqrt(std::max(0.0, 1 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }
}

double binom_se(double hits, double n) {
  if (n <= 0) return 0.0;
  double p = hits / n;
  return std::sqrt(std::max(p * (1 - p), 0.0) / n);
}

}  // namespace

int worker_count(const WosConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("QUANTCONN_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 4;
}

std::string Estimate::to_json() const {
  nlohmann::json j;
  j["value"] = value;
  j["stderr"] = stderr_;
  j["n_walks"] = n_walks;
  j["seed"] = seed;
  j["shards"] = shards;
  j["capped"] = capped;
  return j.dump();
}

template <int D>
double fundamental_solution(double r);

template <>
double fundamental_solution<2>(double r) {
  return -std::log(r) / (2 * kPi);
}
template <>
double fundamental_solution<3>(double r) {
  return 1.0 / (4 * kPi * r);
}

template <int D>
std::vector<std::vector<WalkOutcome<D>>> wos_ensemble(const Domain<D>& dom, const Vec<D>& p,
                                                      long n_walks, uint64_t seed,
                                                      const WosConfig& cfg) {
  if (!dom.inside(p)) throw std::invalid_argument("wos_ensemble: start point not interior");
  const double shell = cfg.shell_rel * dom.diam();
  const int shards = std::max(1, cfg.shards);
  std::vector<std::vector<WalkOutcome<D>>> out(shards);
  std::vector<long> counts(shards, n_walks / shards);
  for (long s = 0; s < n_walks % shards; ++s) ++counts[s];

  auto run_shard = [&](int s) {
    RngStream rng(derive_seed(seed, static_cast<uint64_t>(s)));
    auto& batch = out[s];
    batch.reserve(counts[s]);
    for (long i = 0; i < counts[s]; ++i) {
      Vec<D> x = p;
      WalkOutcome<D> o;
      for (long step = 0;; ++step) {
        double d = dom.distance(x);
        if (d <= shell) {
          auto nb = dom.nearest_boundary(x);
          o.exit = nb.point;
          o.patch = nb.patch;
          break;
        }
        if (step >= cfg.max_steps) {
          o.exit = x;
          o.capped = true;
          break;
        }
        x += d * random_unit<D>(rng);
      }
      batch.push_back(o);
    }
  };

  int workers = std::min(worker_count(cfg), shards);
  if (workers <= 1) {
    for (int s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int s = next.fetch_add(1); s < shards; s = next.fetch_add(1)) run_shard(s);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

template <int D>
Estimate harmonic_measure(const Domain<D>& dom, const Vec<D>& p, const BoundaryEvent<D>& event,
                          long n_walks, uint64_t seed, const WosConfig& cfg, double* shell_bias) {
  auto run_at = [&](const WosConfig& c, uint64_t sd) {
    auto batches = wos_ensemble(dom, p, n_walks, sd, c);
    double hits = 0;
    long capped = 0;
    for (const auto& batch : batches)
      for (const auto& o : batch) {
        if (o.capped) {
          ++capped;
          continue;
        }
        if (event(o.exit, o.patch)) hits += 1;
      }
    Estimate e;
    e.value = hits / n_walks;
    e.stderr_ = binom_se(hits, static_cast<double>(n_walks));
    e.n_walks = n_walks;
    e.seed = sd;
    e.shards = std::max(1, c.shards);
    e.capped = capped;
    return e;
  };
  Estimate e = run_at(cfg, seed);
  if (shell_bias) {
    WosConfig half = cfg;
    half.shell_rel *= 0.5;
    Estimate eh = run_at(half, derive_seed(seed, 0x5eedb1a5ull));
    *shell_bias = e.value - eh.value;
  }
  return e;
}

template <int D>
Estimate green(const Domain<D>& dom, const Vec<D>& p, const Vec<D>& q, long n_walks, uint64_t seed,
               const WosConfig& cfg) {
  if ((p - q).norm() < 1e-14) throw std::invalid_argument("green: degenerate p = q");
  if (!dom.inside(p) || !dom.inside(q))
    throw std::invalid_argument("green: both points must be interior");
  auto batches = wos_ensemble(dom, p, n_walks, seed, cfg);
  double base = fundamental_solution<D>((p - q).norm());
  double sum = 0, sum2 = 0;
  long n = 0, capped = 0;
  for (const auto& batch : batches)
    for (const auto& o : batch) {
      if (o.capped) {
        ++capped;
        continue;
      }
      double v = base - fundamental_solution<D>(std::max((o.exit - q).norm(), 1e-300));
      sum += v;
      sum2 += v * v;
      ++n;
    }
  Estimate e;
  e.n_walks = n_walks;
  e.seed = seed;
  e.shards = std::max(1, cfg.shards);
  e.capped = capped;
  if (n > 0) {
    e.value = sum / n;
    double var = std::max(sum2 / n - e.value * e.value, 0.0);
    e.stderr_ = std::sqrt(var / n);
  }
  return e;
}

namespace {

/// Per-sample list of the level-k cubes whose dilate 2Q contains it.
template <int D>
std::vector<std::vector<std::vector<int>>> two_q_maps(const Lattice<D>& lat) {
  int n = static_cast<int>(lat.points.size());
  std::vector<std::vector<std::vector<int>>> maps(lat.depth + 1);
  std::vector<int> stamp(lat.cubes.size(), -1);
  for (int k = 0; k <= lat.depth; ++k) {
    maps[k].assign(n, {});
    double r = lat.ell(k);
    for (int s = 0; s < n; ++s) {
      auto& cubes = maps[k][s];
      int own = lat.cube_of[k][s];
      cubes.push_back(own);
      stamp[own] = s;
      lat.grid().for_each_within(lat.points[s], r, [&](int t) {
        int c = lat.cube_of[k][t];
        if (stamp[c] != s) {
          stamp[c] = s;
          cubes.push_back(c);
        }
      });
      std::sort(cubes.begin(), cubes.end());
    }
    std::fill(stamp.begin(), stamp.end(), -1);
  }
  return maps;
}

}  // namespace

template <int D>
DensityMap<D> density_map(const Lattice<D>& lat, const Domain<D>& dom, const Vec<D>& p,
                          long n_walks, uint64_t seed, const WosConfig& cfg) {
  DensityMap<D> dm;
  dm.n_walks = n_walks;
  size_t nc = lat.cubes.size();
  dm.omega.assign(nc, 0.0);
  dm.omega2.assign(nc, 0.0);
  dm.sigma2.assign(nc, 0.0);

  auto twoq = two_q_maps(lat);
  // σ(2Q) from the same membership maps
  for (int k = 0; k <= lat.depth; ++k)
    for (int s = 0; s < static_cast<int>(lat.points.size()); ++s)
      for (int c : twoq[k][s]) dm.sigma2[c] += lat.weights[s];

  auto batches = wos_ensemble(dom, p, n_walks, seed, cfg);
  for (const auto& batch : batches)
    for (const auto& o : batch) {
      if (o.capped) {
        ++dm.off_lattice;
        continue;
      }
      int s = lat.grid().nearest(o.exit);
      if (s < 0) {
        ++dm.off_lattice;
        continue;
      }
      for (int k = 0; k <= lat.depth; ++k) {
        dm.omega[lat.cube_of[k][s]] += 1;
        for (int c : twoq[k][s]) dm.omega2[c] += 1;
      }
    }
  dm.se_omega.resize(nc);
  dm.se_omega2.resize(nc);
  for (size_t c = 0; c < nc; ++c) {
    dm.se_omega[c] = binom_se(dm.omega[c], static_cast<double>(n_walks));
    dm.se_omega2[c] = binom_se(dm.omega2[c], static_cast<double>(n_walks));
    dm.omega[c] /= n_walks;
    dm.omega2[c] /= n_walks;
  }
  return dm;
}

template <int D>
std::string density_map_to_csv(const Lattice<D>& lat, const DensityMap<D>& dm) {
  std::ostringstream os;
  os.precision(12);
  os << "cube,level,sigma,omega,se_omega,omega2,se_omega2,sigma2\n";
  for (const auto& c : lat.cubes)
    os << c.id << "," << c.level << "," << c.sigma << "," << dm.omega[c.id] << ","
       << dm.se_omega[c.id] << "," << dm.omega2[c.id] << "," << dm.se_omega2[c.id] << ","
       << dm.sigma2[c.id] << "\n";
  return os.str();
}

template <int D>
HdLdReport classify_hd_ld(const Lattice<D>& lat, const Domain<D>& dom, const Vec<D>& p, int R0,
                          double A, long n_walks, uint64_t seed, const WosConfig& cfg) {
  if (!(A > 1)) throw std::invalid_argument("classify_hd_ld: need A > 1");
  auto dm = density_map(lat, dom, p, n_walks, seed, cfg);
  HdLdReport rep;
  double root_ratio2 = dm.ratio2(R0);
  double root_ratio = dm.ratio(lat, R0);
  rep.sigma_R0 = lat.cubes[R0].sigma;
  rep.omega_R0 = dm.omega[R0];
  rep.omega_se = dm.se_omega[R0];

  // top-down maximal scans
  std::vector<char> in_hd(lat.cubes.size(), 0), in_ld(lat.cubes.size(), 0);
  std::vector<int> stack{R0};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    if (c != R0 && dm.ratio2(c) >= A * root_ratio2) {
      rep.hd.push_back(c);
      in_hd[c] = 1;
      continue;  // maximal: don't descend
    }
    for (int ch : lat.cubes[c].children) stack.push_back(ch);
  }
  stack = {R0};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    if (c != R0 && dm.ratio(lat, c) <= root_ratio / A) {
      rep.ld.push_back(c);
      in_ld[c] = 1;
      continue;
    }
    for (int ch : lat.cubes[c].children) stack.push_back(ch);
  }
  std::sort(rep.hd.begin(), rep.hd.end());
  std::sort(rep.ld.begin(), rep.ld.end());

  // good flags: cubes below R0 not contained in any HD/LD cube
  rep.good.assign(lat.cubes.size(), 0);
  std::vector<int> order{R0};
  rep.good[R0] = 1;
  for (size_t i = 0; i < order.size(); ++i) {
    int c = order[i];
    for (int ch : lat.cubes[c].children) {
      if (rep.good[c] && !in_hd[ch] && !in_ld[ch]) rep.good[ch] = 1;
      order.push_back(ch);
    }
  }

  // sample membership for B_H, B_L, G0
  int n = static_cast<int>(lat.points.size());
  std::vector<char> bh(n, 0), bl(n, 0);
  for (int c : rep.hd)
    for (int s : lat.members_of[c]) bh[s] = 1;
  for (int c : rep.ld)
    for (int s : lat.members_of[c]) bl[s] = 1;
  for (int s : lat.members_of[R0]) {
    if (bh[s]) rep.sigma_BH += lat.weights[s];
    if (bl[s]) rep.sigma_BL += lat.weights[s];
    if (!bh[s] && !bl[s]) {
      rep.sigma_G0 += lat.weights[s];
      rep.g0_samples.push_back(s);
    }
  }
  // ω masses from a fresh scoring pass over the same ensemble seed
  auto batches = wos_ensemble(dom, p, n_walks, seed, cfg);
  std::vector<char> in_r0(n, 0);
  for (int s : lat.members_of[R0]) in_r0[s] = 1;
  double h_bh = 0, h_bl = 0, h_g0 = 0;
  for (const auto& batch : batches)
    for (const auto& o : batch) {
      if (o.capped) continue;
      int s = lat.grid().nearest(o.exit);
      if (s < 0 || !in_r0[s]) continue;
      if (bh[s]) h_bh += 1;
      if (bl[s]) h_bl += 1;
      if (!bh[s] && !bl[s]) h_g0 += 1;
    }
  rep.omega_BH = h_bh / n_walks;
  rep.omega_BL = h_bl / n_walks;
  rep.omega_G0 = h_g0 / n_walks;
  return rep;
}

template <int D>
std::vector<WeakAinftyPoint> weak_ainfty_probe(const Domain<D>& dom, const Lattice<D>& lat,
                                               const Vec<D>& center, double r, const Vec<D>& p,
                                               const std::vector<double>& delta0_grid, long n_walks,
                                               uint64_t seed, const WosConfig& cfg) {
  if ((p - center).norm() <= 4 * r)
    throw std::invalid_argument("weak_ainfty_probe: pole must lie outside 4B");

  // finest-level cubes entirely inside B
  int k = lat.depth;
  std::vector<int> cubes;
  for (int c : lat.level_cubes[k]) {
    bool in = true;
    for (int s : lat.members_of[c])
      if ((lat.points[s] - center).norm() > r) {
        in = false;
        break;
      }
    if (in) cubes.push_back(c);
  }
  double sigma_B = 0.0;
  for (int s = 0; s < static_cast<int>(lat.points.size()); ++s)
    if ((lat.points[s] - center).norm() <= r) sigma_B += lat.weights[s];

  auto batches = wos_ensemble(dom, p, n_walks, seed, cfg);
  std::vector<double> hits(lat.cubes.size(), 0.0);
  double hits_2B = 0.0;
  for (const auto& batch : batches)
    for (const auto& o : batch) {
      if (o.capped) continue;
      if ((o.exit - center).norm() <= 2 * r) hits_2B += 1;
      int s = lat.grid().nearest(o.exit);
      if (s >= 0) hits[lat.cube_of[k][s]] += 1;
    }

  // adversarial order: decreasing estimated density ω/σ
  std::vector<int> order = cubes;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = lat.cubes[a].sigma > 0 ? hits[a] / lat.cubes[a].sigma : 0.0;
    double db = lat.cubes[b].sigma > 0 ? hits[b] / lat.cubes[b].sigma : 0.0;
    if (da != db) return da > db;
    return a < b;
  });

  std::vector<WeakAinftyPoint> curve;
  for (double d0 : delta0_grid) {
    WeakAinftyPoint pt;
    pt.delta0 = d0;
    double budget = d0 * sigma_B;
    double sig = 0.0, om = 0.0;
    for (int c : order) {
      if (sig + lat.cubes[c].sigma > budget) continue;
      sig += lat.cubes[c].sigma;
      om += hits[c];
    }
    pt.sigma_E = sig;
    pt.omega_E = om / n_walks;
    pt.eps0 = hits_2B > 0 ? om / hits_2B : 0.0;
    curve.push_back(pt);
  }
  return curve;
}

template <int D>
WaResult wa_test(const Domain<D>& dom, const Vec<D>& x0, const Vec<D>& p, double Lambda,
                 const std::vector<double>& r_grid, long n_walks, uint64_t seed,
                 const WosConfig& cfg) {
  double dp = dom.distance(p);
  auto samples = sample_boundary(dom, 20000, derive_seed(seed, 77));
  auto sigma_ball = [&](double rr) {
    return boundary_measure(dom, x0, rr, &samples).value;
  };
  double sigma_ref = sigma_ball(dp);
  auto batches = wos_ensemble(dom, p, n_walks, seed, cfg);
  WaResult res;
  res.member = true;
  res.worst_margin = kInf;
  for (double r : r_grid) {
    if (!(r > 0 && r <= dp)) throw std::invalid_argument("wa_test: radius grid must be in (0, δ(p)]");
    double hits = 0;
    for (const auto& batch : batches)
      for (const auto& o : batch)
        if (!o.capped && (o.exit - x0).norm() <= r) hits += 1;
    double om = hits / n_walks;
    double ref = sigma_ball(r) / sigma_ref;
    double lower = ref / Lambda, upper = Lambda * ref;
    double margin = std::min(om > 0 ? om / lower : 0.0, om > 0 ? upper / om : kInf);
    if (margin < res.worst_margin) {
      res.worst_margin = margin;
      res.binding_r = r;
    }
    if (om < lower || om > upper) res.member = false;
  }
  return res;
}

template <int D>
GoodCorkscrew<D> good_corkscrew(const Lattice<D>& lat, const Domain<D>& dom,
                                const WhitneyDecomposition<D>& w, int Q, const Vec<D>& p,
                                double lambda, double kappa, long n_walks, uint64_t seed,
                                const WosConfig& cfg) {
  if (!(kappa > 0 && kappa < 0.1))
    throw std::invalid_argument("good_corkscrew: need κ in (0, 1/10)");
  double ellQ = lat.ell_of(Q);
  Vec<D> xQ = lat.center_of(Q);
  int root = Q;
  while (lat.cubes[root].parent >= 0) root = lat.cubes[root].parent;
  double sigma_R0 = lat.cubes[root].sigma;
  double threshold = lambda * ellQ / sigma_R0;

  auto region = whitney_region(w, lat, Q, 1.0 / 256, 256.0, w.tau0 / 2);
  std::vector<int> cand = region.cube_ids;
  std::sort(cand.begin(), cand.end(), [&](int a, int b) {
    if (w.cubes[a].side != w.cubes[b].side) return w.cubes[a].side > w.cubes[b].side;
    for (int ax = 0; ax < D; ++ax)
      if (w.cubes[a].corner[ax] != w.cubes[b].corner[ax])
        return w.cubes[a].corner[ax] < w.cubes[b].corner[ax];
    return a < b;
  });
  GoodCorkscrew<D> res;
  int tried = 0;
  for (int i : cand) {
    Vec<D> z = w.cubes[i].center();
    if ((z - xQ).norm() > 8 * ellQ) continue;          // z must lie in 2 B_Q
    if (dom.distance(z) < kappa * ellQ) continue;      // κ-corkscrew depth
    if (!dom.inside(z)) continue;
    Estimate g = green(dom, p, z, n_walks, derive_seed(seed, tried), cfg);
    ++tried;
    if (g.value > threshold) {
      res.found = true;
      res.point = z;
      res.green_value = g;
      return res;
    }
    if (tried > 64) break;  // resolution-bounded search, failure reported
  }
  return res;
}

// explicit instantiations
template double fundamental_solution<2>(double);
template double fundamental_solution<3>(double);
template std::vector<std::vector<WalkOutcome<2>>> wos_ensemble<2>(const Domain<2>&, const Vec<2>&,
                                                                  long, uint64_t,
                                                                  const WosConfig&);
template std::vector<std::vector<WalkOutcome<3>>> wos_ensemble<3>(const Domain<3>&, const Vec<3>&,
                                                                  long, uint64_t,
                                                                  const WosConfig&);
template Estimate harmonic_measure<2>(const Domain<2>&, const Vec<2>&, const BoundaryEvent<2>&,
                                      long, uint64_t, const WosConfig&, double*);
template Estimate harmonic_measure<3>(const Domain<3>&, const Vec<3>&, const BoundaryEvent<3>&,
                                      long, uint64_t, const WosConfig&, double*);
template Estimate green<2>(const Domain<2>&, const Vec<2>&, const Vec<2>&, long, uint64_t,
                           const WosConfig&);
template Estimate green<3>(const Domain<3>&, const Vec<3>&, const Vec<3>&, long, uint64_t,
                           const WosConfig&);
template DensityMap<2> density_map<2>(const Lattice<2>&, const Domain<2>&, const Vec<2>&, long,
                                      uint64_t, const WosConfig&);
template std::string density_map_to_csv<2>(const Lattice<2>&, const DensityMap<2>&);
template std::string density_map_to_csv<3>(const Lattice<3>&, const DensityMap<3>&);
template DensityMap<3> density_map<3>(const Lattice<3>&, const Domain<3>&, const Vec<3>&, long,
                                      uint64_t, const WosConfig&);
template HdLdReport classify_hd_ld<2>(const Lattice<2>&, const Domain<2>&, const Vec<2>&, int,
                                      double, long, uint64_t, const WosConfig&);
template HdLdReport classify_hd_ld<3>(const Lattice<3>&, const Domain<3>&, const Vec<3>&, int,
                                      double, long, uint64_t, const WosConfig&);
template std::vector<WeakAinftyPoint> weak_ainfty_probe<2>(const Domain<2>&, const Lattice<2>&,
                                                           const Vec<2>&, double, const Vec<2>&,
                                                           const std::vector<double>&, long,
                                                           uint64_t, const WosConfig&);
template std::vector<WeakAinftyPoint> weak_ainfty_probe<3>(const Domain<3>&, const Lattice<3>&,
                                                           const Vec<3>&, double, const Vec<3>&,
                                                           const std::vector<double>&, long,
                                                           uint64_t, const WosConfig&);
template WaResult wa_test<2>(const Domain<2>&, const Vec<2>&, const Vec<2>&, double,
                             const std::vector<double>&, long, uint64_t, const WosConfig&);
template WaResult wa_test<3>(const Domain<3>&, const Vec<3>&, const Vec<3>&, double,
                             const std::vector<double>&, long, uint64_t, const WosConfig&);
template GoodCorkscrew<2> good_corkscrew<2>(const Lattice<2>&, const Domain<2>&,
                                            const WhitneyDecomposition<2>&, int, const Vec<2>&,
                                            double, double, long, uint64_t, const WosConfig&);
template GoodCorkscrew<3> good_corkscrew<3>(const Lattice<3>&, const Domain<3>&,
                                            const WhitneyDecomposition<3>&, int, const Vec<3>&,
                                            double, double, long, uint64_t, const WosConfig&);

}  // namespace qc
