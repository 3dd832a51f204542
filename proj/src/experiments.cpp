#include "quantconn/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include "quantconn/acf.hpp"
#include "quantconn/connectivity.hpp"
#include "quantconn/domain.hpp"
#include "quantconn/flatness.hpp"
#include "quantconn/harmonic.hpp"
#include "quantconn/lattice.hpp"
#include "quantconn/whitney.hpp"

namespace qc {

using nlohmann::json;

namespace {

MetricRecord metric(std::string name, double value, double se = 0.0, std::string note = "") {
  MetricRecord r;
  r.name = std::move(name);
  r.value = value;
  r.stderr_ = se;
  r.note = std::move(note);
  return r;
}

MetricRecord checked(std::string name, double value, bool pass, double se = 0.0,
                     std::string note = "") {
  MetricRecord r = metric(std::move(name), value, se, std::move(note));
  r.checked = true;
  r.pass = pass;
  return r;
}

long default_walks(const ExperimentConfig& cfg, long dflt) {
  return cfg.walks > 0 ? cfg.walks : dflt;
}
int default_depth(const ExperimentConfig& cfg, int dflt) {
  return cfg.depth > 0 ? cfg.depth : dflt;
}

/// Ball chain between two interior points along the Whitney graph; empty on
/// disconnect.
template <int D>
HarnackChain<D> join_by_chain(const Domain<D>&, const WhitneyDecomposition<D>& w, const Vec<D>& a,
                              const Vec<D>& b) {
  HarnackChain<D> chain;
  chain.x = a;
  chain.y = b;
  int ca = w.locate(a), cb = w.locate(b);
  if (ca < 0 || cb < 0) return chain;
  std::vector<double> label(w.cubes.size(), kInf);
  std::vector<int> parent(w.cubes.size(), -1);
  using Node = std::pair<double, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
  label[ca] = 0.0;
  pq.push({0.0, ca});
  while (!pq.empty()) {
    auto [L, i] = pq.top();
    pq.pop();
    if (L > label[i]) continue;
    if (i == cb) break;
    for (int j : w.cubes[i].neighbors) {
      double Lj = L + (w.cubes[i].center() - w.cubes[j].center()).norm();
      if (Lj < label[j] - 1e-15) {
        label[j] = Lj;
        parent[j] = i;
        pq.push({Lj, j});
      }
    }
  }
  if (label[cb] == kInf) return chain;
  std::vector<int> rev;
  for (int c = cb; c >= 0; c = parent[c]) rev.push_back(c);
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
    chain.centers.push_back(w.cubes[*it].center());
    chain.radii.push_back(w.cubes[*it].side);
  }
  return chain;
}

// ---------------------------------------------------------------------------
// E1: weak local John scans on the slit and cross disks
// ---------------------------------------------------------------------------

Report run_e1(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E1";
  rep.config = cfg;
  int n_x = 200;
  for (const char* tag : {"slit_disk", "cross_disk"}) {
    auto dom = make_domain_tag<2>(tag);
    auto samples = sample_boundary(dom, 6000, derive_seed(cfg.seed, 1));
    auto lat = build_lattice(samples, default_depth(cfg, 6));
    auto w = decompose(dom, 1.0 / 512);
    std::vector<Vec<2>> xs;
    RngStream rng(derive_seed(cfg.seed, 2));
    while (static_cast<int>(xs.size()) < n_x) {
      Vec<2> x(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
      if (dom.inside(x) && dom.distance(x) > 0.02) xs.push_back(x);
    }
    auto res = john_scan(dom, lat, samples, w, xs, cfg.theta, cfg.lambda, cfg.N);
    bool is_slit = std::string(tag) == "slit_disk";
    double floor_frac = is_slit ? 0.9 : 0.75;
    rep.add(checked(std::string(tag) + ".john_pass_fraction", res.pass_fraction,
                    res.pass_fraction >= floor_frac, 0.0,
                    "theta=" + std::to_string(cfg.theta) + " lambda=" + std::to_string(cfg.lambda)));
    Series s;
    s.name = std::string(tag) + ".sigmaF_over_window";
    for (const auto& r : res.records)
      if (r.sigma_window > 0) s.points.push_back({r.delta, r.sigma_F / r.sigma_window});
    std::sort(s.points.begin(), s.points.end());
    rep.series.push_back(std::move(s));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// E2: plank-domain lower-ADR decay and the vanishing floor mass
// ---------------------------------------------------------------------------

Report run_e2(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E2";
  rep.config = cfg;
  long walks = default_walks(cfg, 40000);

  // geometric decay of the surface density at plank points: slope of
  // log2( H^2(B(X_k, 2^{-k-2}))/r^2 ) in k is -n eps = -1 for eps = 1/2
  auto plank6 = make_domain<3>(R"({"type":"plank","params":{"eps":0.5,"k_max":6}})");
  Series decay;
  decay.name = "plank.log2_density_ratio";
  std::vector<double> ks, logs;
  for (int k = 2; k <= 6; ++k) {
    double r = std::exp2(-k - 2);
    Vec<3> Xk(0.0, 0.0, std::exp2(-k));
    double ratio = boundary_measure(plank6, Xk, r).value / (r * r);
    ks.push_back(k);
    logs.push_back(std::log2(ratio));
    decay.points.push_back({static_cast<double>(k), std::log2(ratio)});
  }
  rep.series.push_back(decay);
  // least squares slope
  double mk = 0, ml = 0;
  for (size_t i = 0; i < ks.size(); ++i) {
    mk += ks[i];
    ml += logs[i];
  }
  mk /= ks.size();
  ml /= logs.size();
  double num = 0, den = 0;
  for (size_t i = 0; i < ks.size(); ++i) {
    num += (ks[i] - mk) * (logs[i] - ml);
    den += (ks[i] - mk) * (ks[i] - mk);
  }
  double slope = num / den;
  rep.add(checked("plank.density_slope", slope, std::abs(slope - (-1.0)) <= 0.1, 0.0,
                  "expected -n*eps = -1 within 10%"));

  // The plank screens are capacity-dense: the cumulative floor mass reads as
  // Monte Carlo zero at every k_max (consistent with the vanishing claim),
  // and the quantitatively measurable decay lives in the single-layer
  // domains, whose floor mass shrinks with the layer index.  The runs below
  // use eps = 0.95 so each layer keeps holes (at eps = 1/2 the k = 1 layer
  // tiles the plane: radius/spacing is exactly the covering threshold).
  Vec<3> X0(0.0, 0.0, 1.0);
  const std::string peps = "0.95";
  double prev_floor = kInf, prev_eps = -kInf;
  bool floor_monotone = true, eps_monotone = true;
  Series eps_curve;
  eps_curve.name = "plank.eps0_at_0.1";
  Vec<3> probe_pole(0.0, 0.0, 2.5), probe_ctr(0.0, 0.0, 0.0);
  double probe_r = 0.45;
  for (int kmax : {2, 4, 6}) {
    auto dom = make_domain<3>(R"({"type":"plank","params":{"eps":)" + peps +
                              R"(,"k_max":)" + std::to_string(kmax) + "}}");
    BoundaryEvent<3> on_floor = [](const Vec<3>&, int patch) { return patch == 0; };
    auto est = harmonic_measure(dom, X0, on_floor, walks, derive_seed(cfg.seed, 10 + kmax));
    rep.add(metric("plank.k" + std::to_string(kmax) + ".omega_floor", est.value, est.stderr_,
                   "cumulative domain; zero at MC resolution"));
    if (est.value > prev_floor + 3 * est.stderr_) floor_monotone = false;
    prev_floor = est.value;

    auto samples = sample_boundary(dom, 12000, derive_seed(cfg.seed, 20 + kmax));
    std::vector<BoundarySample<3>> window;
    for (const auto& s : samples)
      if ((s.point - probe_ctr).norm() <= 1.2 * probe_r) window.push_back(s);
    auto lat = build_lattice(window, default_depth(cfg, 5));
    auto curve = weak_ainfty_probe(dom, lat, probe_ctr, probe_r, probe_pole, {0.1}, walks / 2,
                                   derive_seed(cfg.seed, 30 + kmax));
    rep.add(metric("plank.k" + std::to_string(kmax) + ".eps0", curve[0].eps0, 0.0,
                   "adversarial cube union at delta0=0.1"));
    eps_curve.points.push_back({static_cast<double>(kmax), curve[0].eps0});
    if (curve[0].eps0 < prev_eps - 0.05) eps_monotone = false;
    prev_eps = curve[0].eps0;
  }
  rep.series.push_back(eps_curve);
  rep.add(checked("plank.floor_mass_decreasing", floor_monotone ? 1.0 : 0.0, floor_monotone, 0.0,
                  "non-increasing within 3 se"));
  rep.add(checked("plank.eps0_nondecreasing", eps_monotone ? 1.0 : 0.0, eps_monotone));

  // single-layer decay: the per-layer screen gets opaque as k grows
  Series single;
  single.name = "plank.single_layer_floor";
  double prev_single = kInf;
  bool single_decreasing = true;
  for (int k : {2, 3, 4}) {
    auto dom = make_domain<3>(R"({"type":"plank","params":{"eps":)" + peps +
                              R"(,"k_max":1,"layers":[)" + std::to_string(k) + "]}}");
    BoundaryEvent<3> on_floor = [](const Vec<3>&, int patch) { return patch == 0; };
    auto est = harmonic_measure(dom, X0, on_floor, walks, derive_seed(cfg.seed, 50 + k));
    rep.add(metric("plank.single" + std::to_string(k) + ".omega_floor", est.value, est.stderr_,
                   "one-layer domain"));
    single.points.push_back({static_cast<double>(k), est.value});
    if (est.value >= prev_single) single_decreasing = false;
    prev_single = est.value;
  }
  rep.series.push_back(single);
  rep.add(checked("plank.single_layer_decay", single_decreasing ? 1.0 : 0.0, single_decreasing,
                  0.0, "floor mass through one layer shrinks with its index"));
  return rep;
}

// ---------------------------------------------------------------------------
// E3: four-corners corkscrew failure and the nondegeneracy probe
// ---------------------------------------------------------------------------

Report run_e3(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E3";
  rep.config = cfg;
  auto dom = make_domain<2>(R"({"type":"four_corners","params":{"k_max":8}})");

  // interior corkscrews survive at shallow stages and fail at deep ones
  for (int k : {1, 2, 6, 8}) {
    Vec<2> x(2.0 * k, 0.0);
    auto probe = corkscrew_probe(dom, x, 0.5, 0.05);
    bool expect_found = k <= 2;
    rep.add(checked("four_corners.k" + std::to_string(k) + ".corkscrew",
                    probe.found ? 1.0 : 0.0, probe.found == expect_found, 0.0,
                    "c=0.05 r=0.5"));
  }

  // nondegeneracy: removing the ω-heaviest tenth of σ(Δ_x) keeps ω^x(A) >= c
  long walks = default_walks(cfg, 5000);
  auto samples = sample_boundary(dom, 20000, derive_seed(cfg.seed, 3));
  SpatialGrid<2> grid;
  std::vector<Vec<2>> pts(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) pts[i] = samples[i].point;
  grid.build(pts, 0.01);

  double c_min = kInf;
  int tested = 0;
  RngStream rng(derive_seed(cfg.seed, 4));
  for (int trial = 0; tested < 20 && trial < 200; ++trial) {
    int stage = static_cast<int>(rng.uniform() * 5);  // stages 0..4
    // a point inside a random square of the stage
    Vec<2> corner(2.0 * stage, 0.0);
    double L = 1.0;
    for (int d = 0; d < stage; ++d) {
      int digit = static_cast<int>(rng.uniform() * 4);
      L *= 0.25;
      corner += Vec<2>((digit & 1) ? 3 * L : 0.0, (digit & 2) ? 3 * L : 0.0);
    }
    Vec<2> x = corner + Vec<2>(L / 2, L / 2);
    if (!dom.inside(x)) continue;
    ++tested;
    double delta = dom.distance(x);
    double window = 10 * delta;
    auto batches = wos_ensemble(dom, x, walks, derive_seed(cfg.seed, 100 + tested), {});
    std::vector<double> hits(samples.size(), 0.0);
    for (const auto& batch : batches)
      for (const auto& o : batch) {
        if (o.capped) continue;
        int s = grid.nearest(o.exit);
        if (s >= 0) hits[s] += 1;
      }
    // adversary removes the heaviest tenth of the window mass
    std::vector<int> in_window;
    double sigma_window = 0.0;
    for (size_t s = 0; s < samples.size(); ++s)
      if ((samples[s].point - x).norm() <= window) {
        in_window.push_back(static_cast<int>(s));
        sigma_window += samples[s].weight;
      }
    std::sort(in_window.begin(), in_window.end(), [&](int a, int b) {
      double da = hits[a] / samples[a].weight, db = hits[b] / samples[b].weight;
      if (da != db) return da > db;
      return a < b;
    });
    double removed = 0.0, omega_A = 0.0;
    for (int s : in_window) {
      if (removed + samples[s].weight <= 0.1 * sigma_window) {
        removed += samples[s].weight;
      } else {
        omega_A += hits[s];
      }
    }
    c_min = std::min(c_min, omega_A / walks);
  }
  rep.add(checked("four_corners.nondegeneracy_c", c_min, c_min > 0.05, 0.0,
                  "min over 20 interior points, eta=0.1"));
  return rep;
}

// ---------------------------------------------------------------------------
// E4: UR packing profiles
// ---------------------------------------------------------------------------

Report run_e4(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E4";
  rep.config = cfg;

  auto graph = make_domain_tag<2>("lipschitz_graph");
  SetDistance<2> gdist = [&](const Vec<2>& x) { return graph.distance(x); };
  auto glat = build_lattice(sample_boundary(graph, 8192, derive_seed(cfg.seed, 5)),
                            default_depth(cfg, 10));
  std::vector<int> roots = glat.level_cubes[2];
  if (roots.size() > 8) roots.resize(8);
  double worst = 0.0;
  for (int R : roots) {
    auto prof = ur_packing(glat, R, 0.1, 3.0, 8, {}, gdist);
    Series s;
    s.name = "graph.packing.root" + std::to_string(R);
    for (size_t d = 1; d < prof.ratio_at_depth.size(); ++d) {
      s.points.push_back({static_cast<double>(d), prof.ratio_at_depth[d]});
      worst = std::max(worst, prof.ratio_at_depth[d]);
    }
    rep.series.push_back(std::move(s));
  }
  rep.add(checked("graph.packing_max_ratio", worst, worst <= 4.5, 0.0,
                  "eps=0.1 over 8 roots x 8 depths; saturates once the fine "
                  "tooth band is passed"));

  auto fcd = make_domain<2>(R"({"type":"four_corners","params":{"k_max":4}})");
  SetDistance<2> fdist = [&](const Vec<2>& x) { return fcd.distance(x); };
  auto all = sample_boundary(fcd, 8000, derive_seed(cfg.seed, 6));
  std::vector<BoundarySample<2>> block;
  for (const auto& s : all)
    if (s.patch == 4) block.push_back(s);
  auto flat = build_lattice(block, 4);
  auto prof = ur_packing(flat, flat.root(), 1.0 / 32, 3.0, 4, {}, fdist);
  Series s;
  s.name = "four_corners.packing";
  bool ge = true;
  for (int d = 1; d <= 4; ++d) {
    s.points.push_back({static_cast<double>(d), prof.ratio_at_depth[d]});
    ge = ge && prof.ratio_at_depth[d] >= 0.9 * d;
  }
  rep.series.push_back(std::move(s));
  rep.add(checked("four_corners.packing_vs_depth", prof.ratio_at_depth[4], ge, 0.0,
                  "ratio >= 0.9 depth at depths 1..4, eps=1/32"));
  return rep;
}

// ---------------------------------------------------------------------------
// E5: HD/LD families and the good set G0
// ---------------------------------------------------------------------------

Report run_e5(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E5";
  rep.config = cfg;
  long walks = default_walks(cfg, 150000);

  struct Setup {
    std::string tag;
    Vec<2> pole;
    Vec<2> anchor;
    int level;
  };
  std::vector<Setup> setups = {{"half_space", {0.0, 1.0}, {0.0, 0.0}, 3},
                               {"slit_disk", {0.3, 0.4}, {-0.707, -0.707}, 2}};
  for (const auto& st : setups) {
    auto dom = make_domain_tag<2>(st.tag);
    auto samples = sample_boundary(dom, 6000, derive_seed(cfg.seed, 7));
    auto lat = build_lattice(samples, default_depth(cfg, 6));
    int R0 = lat.cube_of[st.level][lat.grid().nearest(st.anchor)];
    for (double A : {8.0, 16.0}) {
      auto repc = classify_hd_ld(lat, dom, st.pole, R0, A, walks,
                                 derive_seed(cfg.seed, 40 + static_cast<int>(A)));
      std::string base = st.tag + ".A" + std::to_string(static_cast<int>(A));
      double C_hd = repc.sigma_BH * A / repc.sigma_R0;
      rep.add(metric(base + ".sigma_BH_C", C_hd, 0.0, "sigma(B_H) = C/A sigma(R0)"));
      bool ld_ok = repc.omega_BL <= repc.omega_R0 / A + 3 * repc.omega_se;
      rep.add(checked(base + ".omega_BL", repc.omega_BL, ld_ok, repc.omega_se,
                      "<= omega(R0)/A within 3 se"));
      double g0_frac = repc.sigma_G0 / repc.sigma_R0;
      rep.add(checked(base + ".sigma_G0_fraction", g0_frac, g0_frac >= 0.5));
      rep.add(metric(base + ".omega_G0", repc.omega_G0, repc.omega_se));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// E6: short paths and the chain ladder
// ---------------------------------------------------------------------------

Report run_e6(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E6";
  rep.config = cfg;
  long walks = default_walks(cfg, 20000);

  auto dom = make_domain_tag<2>("half_space");
  auto samples = sample_boundary(dom, 6000, derive_seed(cfg.seed, 8));
  auto lat = build_lattice(samples, default_depth(cfg, 8));
  auto w = decompose(dom, 1.0 / 512);
  Vec<2> p(0.0, 3.2);

  int R0 = lat.root(0);
  double sigma_R0 = lat.cubes[R0].sigma;

  // ladder of ancestors from a deep cube near x = 0.2, stopping at the
  // coarsest scale whose Whitney region still fits the box
  int Q = lat.cube_of[lat.depth][lat.grid().nearest(Vec<2>(0.2, 0.0))];
  std::vector<int> ladder;
  for (int c = Q; c >= 0; c = lat.cubes[c].parent)
    if (lat.cubes[c].level >= 3) ladder.push_back(c);

  double lambda0 = 1e-3;
  std::vector<Vec<2>> zs;
  bool all_found = true;
  Series greens;
  greens.name = "ladder.lambda_prime";
  for (int c : ladder) {
    auto gc = good_corkscrew(lat, dom, w, c, p, lambda0, cfg.kappa, walks,
                             derive_seed(cfg.seed, 60 + lat.cubes[c].level));
    if (!gc.found) {
      all_found = false;
      break;
    }
    zs.push_back(gc.point);
    double lambda_prime = gc.green_value.value * sigma_R0 / lat.ell_of(c);
    greens.points.push_back({std::log2(lat.ell_of(c)), lambda_prime});
    rep.add(metric("ladder.level" + std::to_string(lat.cubes[c].level) + ".lambda_prime",
                   lambda_prime, gc.green_value.stderr_ * sigma_R0 / lat.ell_of(c),
                   "g(p,z) sigma(R0)/l(Q)"));
  }
  rep.series.push_back(greens);
  rep.add(checked("ladder.all_rungs_found", all_found ? 1.0 : 0.0, all_found));

  if (all_found) {
    // join consecutive rung corkscrews, then hook the top rung to the pole
    double worst_C = 0.0;
    bool chains_ok = true;
    for (size_t i = 0; i + 1 < zs.size(); ++i) {
      auto chain = join_by_chain(dom, w, zs[i], zs[i + 1]);
      if (chain.size() == 0) {
        chains_ok = false;
        continue;
      }
      auto v = verify_chain(dom, chain, kInf);
      chains_ok = chains_ok && v.consecutive_ok;
      worst_C = std::max(worst_C, v.min_C);
    }
    auto top = join_by_chain(dom, w, zs.back(), p);
    if (top.size() == 0) {
      chains_ok = false;
    } else {
      auto v = verify_chain(dom, top, kInf);
      chains_ok = chains_ok && v.consecutive_ok;
      worst_C = std::max(worst_C, v.min_C);
    }
    rep.add(checked("ladder.chains_valid", chains_ok ? 1.0 : 0.0, chains_ok));
    rep.add(checked("ladder.worst_chain_C", worst_C, worst_C <= 64.0, 0.0,
                    "achieved constant, reported only"));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// E7: ACF monotonicity catalog
// ---------------------------------------------------------------------------

Report run_e7(const ExperimentConfig& cfg) {
  Report rep;
  rep.experiment = "E7";
  rep.config = cfg;
  (void)cfg;

  int n = 641;
  double R = 1.3;
  std::vector<double> radii{0.25, 0.35, 0.5, 0.7, 1.0};

  auto lin = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, R, n);
  auto v = acf_j(lin, Vec<2>(0, 0), 0.5);
  bool two_pct = std::abs(v.J1 - M_PI / 2) <= 0.02 * (M_PI / 2) &&
                 std::abs(v.J2 - M_PI / 2) <= 0.02 * (M_PI / 2);
  rep.add(checked("linear.J1", v.J1, two_pct, v.err, "oracle pi k^2/2"));
  rep.add(checked("linear.J", v.J, std::abs(v.J - M_PI * M_PI / 4) <= 0.02 * M_PI * M_PI / 4,
                  v.err, "oracle pi^2 k1^2 k2^2 / 4"));

  struct Entry {
    std::string name;
    AcfPair<2> pair;
  };
  std::vector<Entry> catalog;
  catalog.push_back({"linear_1_1", lin});
  catalog.push_back({"linear_rot", linear_pair<2>(Vec<2>(std::cos(0.5), std::sin(0.5)), 2.0, 0.5,
                                                  R, n)});
  catalog.push_back({"wedge", wedge_pair(R, n)});
  catalog.push_back({"quadrant", quadrant_pair(R, n)});
  auto zero = lin;
  std::fill(zero.u2.begin(), zero.u2.end(), 0.0);
  catalog.push_back({"zero_factor", zero});

  int violations = 0;
  for (const auto& e : catalog) {
    auto scan = monotonicity_scan(e.pair, Vec<2>(0, 0), radii);
    violations += scan.violations;
    Series s;
    s.name = "acf.J." + e.name;
    for (size_t i = 0; i < radii.size(); ++i) s.points.push_back({radii[i], scan.values[i].J});
    rep.series.push_back(std::move(s));
    if (e.name == "linear_1_1") {
      double lo = kInf, hi = 0, emax = 0;
      for (const auto& val : scan.values) {
        lo = std::min(lo, val.J);
        hi = std::max(hi, val.J);
        emax = std::max(emax, val.err);
      }
      rep.add(checked("linear.equality_flatness", hi - lo, hi - lo <= 2 * emax, emax,
                      "max-min <= 2x quadrature error"));
    }
  }
  rep.add(checked("catalog.monotonicity_violations", violations, violations == 0, 0.0,
                  "5 pairs, drops beyond the error budget"));
  return rep;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"E1", "E2", "E3", "E4", "E5", "E6", "E7"};
  return names;
}

ExperimentConfig parse_config(const std::string& text) {
  json j = json::parse(text);
  static const std::set<std::string> known{"version", "experiment", "seed",   "walks", "depth",
                                           "out",     "thresholds"};
  static const std::set<std::string> known_thr{"eps", "A",      "lambda", "theta",
                                               "N",   "Lambda", "Gamma",  "kappa"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\"");
  if (j.contains("version") && j["version"].get<int>() != 1)
    throw std::invalid_argument("config: unsupported version");
  ExperimentConfig cfg;
  cfg.experiment = j.value("experiment", "");
  cfg.seed = j.value("seed", static_cast<uint64_t>(42));
  cfg.walks = j.value("walks", 0L);
  cfg.depth = j.value("depth", 0);
  cfg.out_dir = j.value("out", ".");
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    for (auto it = t.begin(); it != t.end(); ++it)
      if (!known_thr.count(it.key()))
        throw std::invalid_argument("config: unknown threshold \"" + it.key() + "\"");
    cfg.eps = t.value("eps", cfg.eps);
    cfg.A = t.value("A", cfg.A);
    cfg.lambda = t.value("lambda", cfg.lambda);
    cfg.theta = t.value("theta", cfg.theta);
    cfg.N = t.value("N", cfg.N);
    cfg.Lambda = t.value("Lambda", cfg.Lambda);
    cfg.Gamma = t.value("Gamma", cfg.Gamma);
    cfg.kappa = t.value("kappa", cfg.kappa);
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["version"] = 1;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["walks"] = cfg.walks;
  j["depth"] = cfg.depth;
  j["out"] = cfg.out_dir;
  j["thresholds"] = {{"eps", cfg.eps},       {"A", cfg.A},         {"lambda", cfg.lambda},
                     {"theta", cfg.theta},   {"N", cfg.N},         {"Lambda", cfg.Lambda},
                     {"Gamma", cfg.Gamma},   {"kappa", cfg.kappa}};
  return j.dump();
}

Report run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "E1") return run_e1(cfg);
  if (cfg.experiment == "E2") return run_e2(cfg);
  if (cfg.experiment == "E3") return run_e3(cfg);
  if (cfg.experiment == "E4") return run_e4(cfg);
  if (cfg.experiment == "E5") return run_e5(cfg);
  if (cfg.experiment == "E6") return run_e6(cfg);
  if (cfg.experiment == "E7") return run_e7(cfg);
  std::string names;
  for (const auto& n : experiment_names()) names += n + " ";
  throw std::invalid_argument("unknown experiment \"" + cfg.experiment + "\"; valid: " + names);
}

std::string report_to_json(const Report& report) {
  json j;
  j["experiment"] = report.experiment;
  j["config"] = json::parse(config_to_json(report.config));
  j["all_pass"] = report.all_pass;
  auto records = json::array();
  for (const auto& r : report.records) {
    json jr;
    jr["name"] = r.name;
    jr["value"] = r.value;
    jr["stderr"] = r.stderr_;
    jr["note"] = r.note;
    jr["checked"] = r.checked;
    jr["pass"] = r.pass;
    records.push_back(jr);
  }
  j["records"] = records;
  auto series = json::array();
  for (const auto& s : report.series) {
    json js;
    js["name"] = s.name;
    auto pts = json::array();
    for (const auto& [a, b] : s.points) pts.push_back({a, b});
    js["points"] = pts;
    series.push_back(js);
  }
  j["series"] = series;
  return j.dump(2);
}

Report report_from_json(const std::string& text) {
  json j = json::parse(text);
  Report rep;
  rep.experiment = j["experiment"];
  rep.config = parse_config(j["config"].dump());
  rep.all_pass = j["all_pass"];
  for (const auto& jr : j["records"]) {
    MetricRecord r;
    r.name = jr["name"];
    r.value = jr["value"];
    r.stderr_ = jr["stderr"];
    r.note = jr["note"];
    r.checked = jr["checked"];
    r.pass = jr["pass"];
    rep.records.push_back(r);
  }
  for (const auto& js : j["series"]) {
    Series s;
    s.name = js["name"];
    for (const auto& pt : js["points"]) s.points.push_back({pt[0], pt[1]});
    rep.series.push_back(s);
  }
  return rep;
}

std::string report_to_csv(const Report& report) {
  std::ostringstream os;
  os.precision(17);
  os << "name,value,stderr,checked,pass,note\n";
  for (const auto& r : report.records)
    os << r.name << "," << r.value << "," << r.stderr_ << "," << (r.checked ? 1 : 0) << ","
       << (r.pass ? 1 : 0) << "," << r.note << "\n";
  return os.str();
}

std::string report_to_svg(const Report& report) {
  const int W = 760, H = 480, M = 56;
  std::ostringstream os;
  os.precision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << M << "\" y=\"24\" font-size=\"15\">" << report.experiment
     << " report</text>\n";
  double xlo = kInf, xhi = -kInf, ylo = kInf, yhi = -kInf;
  for (const auto& s : report.series)
    for (const auto& [a, b] : s.points) {
      xlo = std::min(xlo, a);
      xhi = std::max(xhi, a);
      ylo = std::min(ylo, b);
      yhi = std::max(yhi, b);
    }
  if (!(xlo < xhi)) {
    xlo = 0;
    xhi = 1;
  }
  if (!(ylo < yhi)) {
    ylo = 0;
    yhi = 1;
  }
  auto px = [&](double x) { return M + (x - xlo) / (xhi - xlo) * (W - 2 * M); };
  auto py = [&](double y) { return H - M - (y - ylo) / (yhi - ylo) * (H - 2 * M); };
  os << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\""
     << H - 2 * M << "\" fill=\"none\" stroke=\"#999\"/>\n";
  const char* colors[] = {"#1b6ca8", "#c23b22", "#2e8540", "#8e44ad",
                          "#d4a017", "#16a2b8", "#555555", "#e2639b"};
  int ci = 0;
  for (const auto& s : report.series) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[ci % 8] << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [a, b] : s.points) os << px(a) << "," << py(b) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - M + 4 << "\" y=\"" << M + 14 * (ci + 1)
       << "\" font-size=\"9\" fill=\"" << colors[ci % 8] << "\">" << s.name << "</text>\n";
    ++ci;
  }
  os << "<text x=\"" << M << "\" y=\"" << H - 12 << "\" font-size=\"11\">[" << xlo << ", " << xhi
     << "] x [" << ylo << ", " << yhi << "]</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace qc
