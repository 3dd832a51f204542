// Acceptance suite: runs every stated criterion at its stated tolerance and
// prints one pass/fail line per criterion.  Exit status is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "quantconn/acf.hpp"
#include "quantconn/connectivity.hpp"
#include "quantconn/domain.hpp"
#include "quantconn/experiments.hpp"
#include "quantconn/flatness.hpp"
#include "quantconn/harmonic.hpp"
#include "quantconn/lattice.hpp"
#include "quantconn/whitney.hpp"

using namespace qc;

namespace {

int failures = 0;

void line(int criterion, bool pass, const std::string& text) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, text.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

bool record_pass(const Report& rep, const std::string& name) {
  for (const auto& r : rep.records)
    if (r.name == name) return !r.checked || r.pass;
  return false;
}

double record_value(const Report& rep, const std::string& name) {
  for (const auto& r : rep.records)
    if (r.name == name) return r.value;
  return std::nan("");
}

// ---------------------------------------------------------------------------

void criterion_1_dyadic() {
  double t0 = now_seconds();
  bool ok = true;
  std::string detail;

  auto check_lattice = [&](const std::string& tag, const Lattice<2>& lat) {
    int n = static_cast<int>(lat.points.size());
    // (i)-(iii): partition and nesting, exact on sample indices
    for (int k = 0; k <= lat.depth && ok; ++k) {
      std::vector<int> seen(n, 0);
      for (int c : lat.level_cubes[k]) {
        if (lat.members_of[c].empty()) ok = false;
        for (int s : lat.members_of[c]) {
          if (lat.cube_of[k][s] != c) ok = false;
          ++seen[s];
        }
      }
      for (int s = 0; s < n; ++s)
        if (seen[s] != 1) ok = false;
    }
    for (const auto& c : lat.cubes) {
      if (c.level == lat.depth) continue;
      size_t kid_members = 0;
      for (int ch : c.children) {
        if (lat.cubes[ch].parent != c.id) ok = false;
        kid_members += lat.members_of[ch].size();
      }
      if (kid_members != lat.members_of[c.id].size()) ok = false;
    }
    // (iv)-(v): measured constants, uniform across levels 2..depth
    auto stats = lattice_stats(lat);
    double a0_min = kInf, a0_max = 0, c1_min = kInf, c1_max = 0;
    for (int k = 2; k <= lat.depth; ++k) {
      a0_min = std::min(a0_min, stats[k].a0);
      a0_max = std::max(a0_max, stats[k].a0);
      c1_min = std::min(c1_min, stats[k].c1);
      c1_max = std::max(c1_max, stats[k].c1);
    }
    if (a0_max / a0_min > 4.0 || c1_max / c1_min > 4.0) ok = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, " %s[a0 %.2f..%.2f, C1 %.2f..%.2f]", tag.c_str(), a0_min,
                  a0_max, c1_min, c1_max);
    detail += buf;
  };

  auto disk = make_domain_tag<2>("disk");
  check_lattice("circle", build_lattice(sample_boundary(disk, 6000, 11), 8));
  auto graph = make_domain_tag<2>("lipschitz_graph");
  check_lattice("graph", build_lattice(sample_boundary(graph, 6000, 12), 8));
  auto fc = make_domain<2>(R"({"type":"four_corners","params":{"k_max":4}})");
  auto all = sample_boundary(fc, 8000, 13);
  std::vector<BoundarySample<2>> block;
  for (const auto& s : all)
    if (s.patch == 4) block.push_back(s);
  check_lattice("four_corners", build_lattice(block, 4));

  double dt = now_seconds() - t0;
  if (dt > 10.0) ok = false;
  line(1, ok, "dyadic grid properties (i)-(v), constants uniform across levels;" + detail +
                  " runtime " + std::to_string(dt).substr(0, 4) + " s (<= 10 s)");
}

void criterion_2_whitney() {
  bool ok = true;
  double worst_defect = 0.0;
  for (const char* tag : {"half_space", "slit_disk", "lipschitz_graph"}) {
    auto dom = make_domain_tag<2>(tag);
    auto w = decompose(dom, 1.0 / 256);
    double vol = 0.0;
    for (const auto& c : w.cubes) {
      double ratio = c.dist / c.diam();
      if (ratio < 4.0 - 1e-12 || ratio > 40.0 + 1e-12) ok = false;
      double lo4 = dom.box_distance(c.box().dilated(4.0));
      if (lo4 < 4.0 * c.diam() - 1e-12) ok = false;
      vol += c.box().volume();
    }
    double root_vol = std::pow(w.root_side, 2);
    double defect = std::abs(vol + w.uncovered_volume - root_vol) / root_vol;
    worst_defect = std::max(worst_defect, defect);
    if (defect > 1e-9) ok = false;
  }
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "whitney gauge 4..40 on all cubes of 3 domains; cover defect %.1e (<= 1e-9)",
                worst_defect);
  line(2, ok, buf);
}

void criterion_3_wos_oracle() {
  auto half = make_domain_tag<2>("half_space");
  Vec<2> p(0.0, 1.0);
  BoundaryEvent<2> interval = [](const Vec<2>& y, int) {
    return y[1] == 0.0 && y[0] >= -1.0 && y[0] <= 1.0;
  };
  auto est = harmonic_measure(half, p, interval, 100000, 2024);
  double oracle = (std::atan(1.0) - std::atan(-1.0)) / M_PI;
  bool ok = std::abs(est.value - oracle) <= 3 * est.stderr_ && est.stderr_ <= 0.005;

  auto disk = make_domain_tag<2>("disk");
  double theta = 0.8;
  BoundaryEvent<2> arc = [theta](const Vec<2>& y, int) {
    double a = std::atan2(y[1], y[0]);
    return a >= 0.0 && a <= theta;
  };
  auto arc_est = harmonic_measure(disk, Vec<2>(0.0, 0.0), arc, 100000, 2025);
  ok = ok && std::abs(arc_est.value - theta / (2 * M_PI)) <= 3 * arc_est.stderr_;

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "WoS vs Poisson: half-plane %.4f vs %.4f (se %.4f), disk arc %.4f vs %.4f",
                est.value, oracle, est.stderr_, arc_est.value, theta / (2 * M_PI));
  line(3, ok, buf);
}

void criterion_4_green() {
  auto disk = make_domain_tag<2>("disk");
  Vec<2> ctr(0.0, 0.0);
  bool ok = true;
  for (double rq : {0.25, 0.5, 0.75}) {
    auto est = green(disk, ctr, Vec<2>(rq, 0.0), 100000, 77);
    double oracle = std::log(1.0 / rq) / (2 * M_PI);
    if (std::abs(est.value - oracle) > 0.02 * oracle) ok = false;
  }
  Vec<2> a(0.3, 0.2), b(-0.4, -0.1);
  auto gab = green(disk, a, b, 100000, 78);
  auto gba = green(disk, b, a, 100000, 79);
  double comb = std::sqrt(gab.stderr_ * gab.stderr_ + gba.stderr_ * gba.stderr_);
  if (std::abs(gab.value - gba.value) > 3 * comb) ok = false;
  line(4, ok, "disk Green within 2% of (1/2pi) ln(1/|q|) at |q| in {.25,.5,.75}; symmetric");
}

void criterion_9_roundtrip() {
  bool ok = true;
  double worst_C = 0.0, worst_l2_ratio = kInf;
  int total = 0;
  RngStream rng(515);

  auto run_domain = [&](const Domain<2>& dom, auto start_sampler) {
    for (double lambda : {0.1, 0.3, 0.8}) {
      int kept = 0, tries = 0;
      while (kept < 20 && tries < 600) {
        ++tries;
        CarrotPath<2> p;
        auto [y, normal] = start_sampler(rng);
        p.vertices.push_back(y);
        double h = 1e-4, L = 0.0;
        double spread = (1.0 - lambda) * 0.7;
        Vec<2> cur = y;
        double base_ang = std::atan2(normal[1], normal[0]);
        for (int i = 0; i < 30; ++i) {
          double ang = base_ang + spread * (2 * rng.uniform() - 1);
          Vec<2> next = cur + h * Vec<2>(std::cos(ang), std::sin(ang));
          if (!dom.inside(next) || dom.distance(next) < h * 0.2) break;
          // keep a margin over the carrot budget so the path stays admissible
          if (dom.distance(next) < lambda * (L + h) * 1.15) break;
          cur = next;
          L += h;
          p.vertices.push_back(cur);
          h *= 1.4;
        }
        if (p.vertices.size() < 8) continue;
        auto v = verify_carrot(dom, p.vertices, lambda);
        if (!v.ok) continue;
        ++kept;
        ++total;
        p.lambda = lambda;
        auto chain = path_to_chain(dom, p);
        auto vc = verify_chain(dom, chain, chain.C);
        if (!vc.ok) ok = false;
        worst_C = std::max(worst_C, chain.C);
        auto back = chain_to_path(dom, chain);
        if (!back.tail_bound_ok) ok = false;
        worst_l2_ratio = std::min(worst_l2_ratio, back.path.lambda / lambda);
        if (back.path.lambda < 0.1 * lambda) ok = false;
      }
      if (kept < 10) ok = false;
    }
  };

  auto half = make_domain_tag<2>("half_space");
  run_domain(half, [](RngStream& r) {
    return std::pair<Vec<2>, Vec<2>>({2 * r.uniform() - 1, 0.0}, {0.0, 1.0});
  });
  auto slit = make_domain_tag<2>("slit_disk");
  auto samples = sample_boundary(slit, 512, 99);
  run_domain(slit, [&](RngStream& r) {
    const auto& s = samples[static_cast<size_t>(r.uniform() * samples.size())];
    return std::pair<Vec<2>, Vec<2>>(s.point, s.normal);
  });

  if (total < 100) ok = false;
  if (worst_C > 80.0) ok = false;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "carrot/chain round trip over %d carrots: C <= %.1f, lambda''/lambda >= %.2f "
                "(>= 0.1)",
                total, worst_C, worst_l2_ratio);
  line(9, ok, buf);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");

  criterion_1_dyadic();
  criterion_2_whitney();
  criterion_3_wos_oracle();
  criterion_4_green();

  // experiment-backed criteria; each experiment runs twice for criterion 13
  std::map<std::string, Report> first;
  std::map<std::string, std::string> first_json, second_json;
  for (const auto& name : experiment_names()) {
    ExperimentConfig cfg;
    cfg.experiment = name;
    auto rep = run_experiment(cfg);
    first_json[name] = report_to_json(rep);
    first.emplace(name, std::move(rep));
    second_json[name] = report_to_json(run_experiment(cfg));
  }

  {
    const Report& e7 = first.at("E7");
    bool ok = record_pass(e7, "linear.J1") && record_pass(e7, "linear.J") &&
              record_pass(e7, "linear.equality_flatness") &&
              record_pass(e7, "catalog.monotonicity_violations");
    line(5, ok, "ACF: linear pair within 2%, no monotonicity violation on 5 pairs, "
                "equality case flat");
  }

  {
    const Report& e4 = first.at("E4");
    bool ok = record_pass(e4, "graph.packing_max_ratio") &&
              record_pass(e4, "four_corners.packing_vs_depth");
    // brute-force flatness witness at depth <= 4: dense search minus its
    // resolution still clears the threshold
    auto fc = make_domain<2>(R"({"type":"four_corners","params":{"k_max":4}})");
    SetDistance<2> fdist = [&](const Vec<2>& x) { return fc.distance(x); };
    auto all = sample_boundary(fc, 8000, 21);
    std::vector<BoundarySample<2>> block;
    for (const auto& s : all)
      if (s.patch == 4) block.push_back(s);
    auto lat = build_lattice(block, 4);
    BbetaOptions dense;
    dense.angle_grid = 96;
    dense.offset_grid = 48;
    dense.refine_rounds = 3;
    dense.chord_points = 97;
    for (int k = 1; k <= 4; ++k) {
      int c = lat.level_cubes[k].front();
      auto rec = bbeta_cube(lat, c, 3.0, dense, fdist);
      if (rec.bbeta - rec.resolution <= 1.0 / 32) ok = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "UR packing dichotomy: graph ratio %.2f bounded, cantor ratio %.2f ~ depth 4, "
                  "bbeta brute-verified",
                  record_value(e4, "graph.packing_max_ratio"),
                  record_value(e4, "four_corners.packing_vs_depth"));
    line(6, ok, buf);
  }

  {
    const Report& e2 = first.at("E2");
    bool ok = record_pass(e2, "plank.density_slope");
    char buf[120];
    std::snprintf(buf, sizeof buf,
                  "plank lower-ADR decay: log2 density slope %.3f vs -n*eps = -1 within 10%%",
                  record_value(e2, "plank.density_slope"));
    line(7, ok, buf);
  }

  {
    const Report& e3 = first.at("E3");
    bool ok = record_pass(e3, "four_corners.k1.corkscrew") &&
              record_pass(e3, "four_corners.k2.corkscrew") &&
              record_pass(e3, "four_corners.k6.corkscrew") &&
              record_pass(e3, "four_corners.k8.corkscrew") &&
              record_pass(e3, "four_corners.nondegeneracy_c");
    char buf[140];
    std::snprintf(buf, sizeof buf,
                  "four-corners: corkscrew passes k<=2 fails k>=6; nondegeneracy c = %.3f > 0",
                  record_value(e3, "four_corners.nondegeneracy_c"));
    line(8, ok, buf);
  }

  criterion_9_roundtrip();

  {
    const Report& e1 = first.at("E1");
    bool ok = record_pass(e1, "slit_disk.john_pass_fraction");
    char buf[140];
    std::snprintf(buf, sizeof buf,
                  "slit-disk weak local John: pass fraction %.2f (>= 0.90) at N=2 lambda=0.02 "
                  "theta=0.25",
                  record_value(e1, "slit_disk.john_pass_fraction"));
    line(10, ok, buf);
  }

  {
    const Report& e5 = first.at("E5");
    bool ok = true;
    for (const char* d : {"half_space", "slit_disk"})
      for (int A : {8, 16}) {
        std::string base = std::string(d) + ".A" + std::to_string(A);
        ok = ok && record_pass(e5, base + ".omega_BL") &&
             record_pass(e5, base + ".sigma_G0_fraction");
      }
    line(11, ok, "HD/LD: omega(B_L) <= omega(R0)/A within 3 se and sigma(G0) >= 0.5 sigma(R0) "
                 "for A in {8,16} on half-plane and slit disk");
  }

  {
    const Report& e2 = first.at("E2");
    bool ok = record_pass(e2, "plank.eps0_nondecreasing") &&
              record_pass(e2, "plank.floor_mass_decreasing") &&
              record_pass(e2, "plank.single_layer_decay");
    line(12, ok, "plank weak-A-infinity failure signature: eps0(0.1) non-decreasing in k_max; "
                 "floor mass non-increasing (zero at MC resolution) and single-layer decay "
                 "strict");
  }

  {
    bool ok = true;
    for (const auto& name : experiment_names())
      if (first_json[name] != second_json[name]) ok = false;
    line(13, ok, "determinism: all experiments re-run byte-identical canonical JSON");
  }

  std::printf("================\n%s (%d failure%s)\n", failures == 0 ? "ACCEPTED" : "REJECTED",
              failures, failures == 1 ? "" : "s");
  return failures;
}
