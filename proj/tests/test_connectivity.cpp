#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "quantconn/connectivity.hpp"
#include "quantconn/harmonic.hpp"

using namespace qc;

namespace {

/// Random λ-admissible staircase carrot in the upper half-plane: geometric
/// step growth away from the floor keeps δ(z) ≈ height comparable to length.
CarrotPath<2> random_carrot(double lambda, RngStream& rng) {
  CarrotPath<2> p;
  double x = 2 * rng.uniform() - 1;
  p.vertices.push_back({x, 0.0});
  double h = 1e-4;
  // cone half-angle around the vertical shrinks as λ grows
  double spread = (1.0 - lambda) * 0.8;
  Vec<2> cur(x, 0.0);
  for (int i = 0; i < 28; ++i) {
    double ang = M_PI / 2 + spread * (2 * rng.uniform() - 1);
    cur += h * Vec<2>(std::cos(ang), std::sin(ang));
    if (cur[1] <= 1e-6) cur[1] = 1e-6 + h * 0.5;
    p.vertices.push_back(cur);
    h *= 1.45;
    if (cur[1] > 1.5) break;
  }
  p.lambda = lambda;
  return p;
}

}  // namespace

TEST_CASE("verify_carrot basics") {
  auto half = make_domain_tag<2>("half_space");
  std::vector<Vec<2>> straight{{0, 0}, {0, 1}};
  auto v1 = verify_carrot(half, straight, 1.0);
  CHECK(v1.ok);
  CHECK(v1.worst_ratio == doctest::Approx(1.0));
  auto v2 = verify_carrot(half, straight, 1.01);
  CHECK(!v2.ok);

  // a detour hugging the boundary kills the ratio
  std::vector<Vec<2>> detour{{0, 0}, {0, 0.05}, {2.0, 0.05}, {2.0, 1.0}};
  auto v3 = verify_carrot(half, detour, 1.0);
  CHECK(!v3.ok);
  CHECK(v3.worst_ratio < 0.1);
  // brute-force check of the reported worst ratio: at the end of the long
  // horizontal run L ≈ 0.05 + 2 and δ = 0.05
  CHECK(v3.worst_ratio == doctest::Approx(0.05 / 2.05).epsilon(0.05));

  // leaving the domain is fatal
  auto slit = make_domain_tag<2>("slit_disk");
  std::vector<Vec<2>> crossing{{0.5, -0.4}, {0.5, 0.4}};
  // first vertex must be on the boundary; route from below the slit upward
  std::vector<Vec<2>> bad{{0.5, 0.0}, {0.5, 0.4}};
  auto v4 = verify_carrot(slit, bad, 0.01);
  CHECK(v4.ok);  // upward from the slit's upper face is legal
  std::vector<Vec<2>> through{{0.3, 0.0}, {0.3, -0.3}, {1.3, -0.3}, {1.3, 0.3}, {0.5, 0.3}};
  auto v5 = verify_carrot(slit, through, 0.001);
  CHECK(v5.leaves_domain);  // exits the disk and re-enters
  CHECK(!v5.ok);
}

TEST_CASE("verify_chain conditions") {
  auto half = make_domain_tag<2>("half_space");

  // single ball containing x and y'
  HarnackChain<2> single;
  single.centers = {{0.0, 1.0}};
  single.radii = {0.5};
  single.x = {0.1, 1.2};
  single.y = {0.0, 0.6};
  auto v = verify_chain(half, single, 1.0);
  CHECK(v.consecutive_ok);
  CHECK(v.min_C <= 1.0 + 1e-12);
  CHECK(v.ok);

  // dyadic ladder: radii 2^{-j}/4 at heights 2^{-j}
  HarnackChain<2> ladder;
  ladder.x = {0.0, 1.0};
  ladder.y = {0.0, 0.0};
  for (int j = 0; j <= 10; ++j) {
    double h = std::exp2(-j);
    ladder.centers.push_back({0.0, h});
    ladder.radii.push_back(h * 0.45);
  }
  auto vl = verify_chain(half, ladder, 10.0);
  CHECK(vl.consecutive_ok);
  CHECK(vl.ok);
  CHECK(vl.band_count == 1);  // exactly one ball per dyadic band
  CHECK(vl.growth_C <= 1.0 + 1e-12);

  // 2C+1 balls in one radius band violate the fourth condition
  HarnackChain<2> crowd = ladder;
  for (int k = 0; k < 9; ++k) {
    crowd.centers.push_back({0.3 + 0.2 * k, 1.0});
    crowd.radii.push_back(0.45);
  }
  auto vc = verify_chain(half, crowd, 4.0);
  CHECK(vc.band_count >= 9);
  CHECK(!vc.ok);
}

TEST_CASE("path_to_chain and chain_to_path round trip") {
  auto half = make_domain_tag<2>("half_space");

  // straight vertical carrot -> ladder-like chain with small C
  CarrotPath<2> straight;
  straight.vertices = {{0, 0}, {0, 1}};
  straight.lambda = 1.0;
  auto chain = path_to_chain(half, straight);
  REQUIRE(chain.size() >= 4);
  auto vc = verify_chain(half, chain, chain.C);
  CHECK(vc.ok);
  CHECK(chain.C <= 30.0);

  auto back = chain_to_path(half, chain);
  CHECK(back.tail_bound_ok);
  CHECK(back.path.lambda >= 0.2);  // reverse proof yields λ near 1/3

  // degenerate one-vertex path is rejected by verification
  CarrotPath<2> degen;
  degen.vertices = {{0.3, 0.5}};
  auto vd = verify_carrot(half, degen.vertices, 0.5);
  CHECK(!vd.ok);
}

TEST_CASE("round trip over random carrots keeps uniform constants") {
  auto half = make_domain_tag<2>("half_space");
  RngStream rng(2024);
  for (double lambda : {0.1, 0.3, 0.8}) {
    double worst_C = 0.0, worst_l2 = kInf;
    int kept = 0;
    for (int t = 0; t < 40; ++t) {
      auto p = random_carrot(lambda, rng);
      auto v = verify_carrot(half, p.vertices, lambda);
      if (!v.ok) continue;  // generator is stochastic; keep admissible ones
      ++kept;
      auto chain = path_to_chain(half, p);
      auto vc = verify_chain(half, chain, chain.C);
      CHECK(vc.ok);
      worst_C = std::max(worst_C, chain.C);
      auto back = chain_to_path(half, chain);
      CHECK(back.tail_bound_ok);
      worst_l2 = std::min(worst_l2, back.path.lambda);
    }
    REQUIRE(kept >= 10);
    CHECK(worst_C <= 60.0);            // uniform C(λ) over the batch
    CHECK(worst_l2 >= 0.1 * lambda);   // λ'' floor from the conversion
  }
}

TEST_CASE("find_carrot in the half-plane and the slit disk") {
  auto half = make_domain_tag<2>("half_space");
  auto wh = decompose(half, 1.0 / 256);
  auto r = find_carrot(half, wh, Vec<2>(0, 0), Vec<2>(0, 1), Vec<2>(0, 1), 0.3);
  REQUIRE(r.path.has_value());
  CHECK(r.lambda_achieved >= 0.3);
  double lb = find_lambda_best(half, wh, Vec<2>(0, 0), Vec<2>(0, 1), Vec<2>(0, 1));
  CHECK(lb >= 0.3);

  // slit disk: reach the lower face of the slit from above; the slit is
  // anchored to the circle at (1,0), so the only route rounds the free tip
  // at the origin
  auto slit = make_domain_tag<2>("slit_disk");
  auto ws = decompose(slit, 1.0 / 512);
  Vec<2> y(0.5, 0.0), x(0.5, 0.3);
  auto rs = find_carrot(slit, ws, y, Vec<2>(0, -1), x, 0.02);
  REQUIRE(rs.path.has_value());
  CHECK(rs.lambda_achieved >= 0.02);
  bool below = false, beyond = false;
  for (const auto& v : rs.path->vertices) {
    if (v[1] < -0.02) below = true;
    if (v[0] < 0.0) beyond = true;
  }
  CHECK(below);
  CHECK(beyond);

  // the upper face is reachable directly at high λ
  auto ru = find_carrot(slit, ws, y, Vec<2>(0, 1), x, 0.5);
  CHECK(ru.path.has_value());
}

TEST_CASE("find_carrot disconnect certificate") {
  auto fc = make_domain<2>(R"({"type":"four_corners","params":{"k_max":1}})");
  Box<2> box{{-0.5, -0.5}, {3.5, 1.5}};
  auto w = decompose(fc, box, 1.0 / 128);
  // y on block 0's square, x inside block 1: separate components of Ω
  Vec<2> y(0.5, 1.0), x(2.1, 0.1);
  auto r = find_carrot(fc, w, y, Vec<2>(0, -1), x, 0.01);
  CHECK(!r.path.has_value());
  CHECK(r.fail == CarrotFail::disconnected);
}

TEST_CASE("john_scan on the half-plane passes everywhere") {
  auto half = make_domain_tag<2>("half_space");
  auto samples = sample_boundary(half, 2048, 5);
  auto lat = build_lattice(samples, 4);
  auto w = decompose(half, 1.0 / 128);
  std::vector<Vec<2>> xs;
  RngStream rng(9);
  for (int i = 0; i < 24; ++i) xs.push_back({2 * rng.uniform() - 1, 0.2 + rng.uniform()});
  auto res = john_scan(half, lat, samples, w, xs, 0.9, 0.1, 2.0);
  CHECK(res.pass_fraction == doctest::Approx(1.0));

  // θ = 0 with at least one reachable sample passes vacuously
  auto res0 = john_scan(half, lat, samples, w, xs, 0.0, 0.1, 2.0);
  CHECK(res0.pass_fraction == doctest::Approx(1.0));
  CHECK_THROWS(john_scan(half, lat, samples, w, xs, 0.5, 0.1, 1.0));

  auto csv = john_scan_csv(res);
  CHECK(csv.find("delta,sigma_window,sigma_F,pass") != std::string::npos);
}

TEST_CASE("john_scan T_Q membership map") {
  auto half = make_domain_tag<2>("half_space");
  auto samples = sample_boundary(half, 2048, 5);
  auto lat = build_lattice(samples, 4);
  auto w = decompose(half, 1.0 / 512);
  // xs placed inside U_Q for two level-3 cubes (strip heights ~ l(Q)/2 needs
  // the small-eta region parameters)
  std::vector<int> qs = {lat.level_cubes[3][2], lat.level_cubes[3][5]};
  std::vector<Vec<2>> xs;
  for (int Q : qs) {
    Vec<2> c = lat.center_of(Q);
    xs.push_back({c[0], 0.45 * lat.ell_of(Q)});
  }
  double eta = std::exp2(-24), K = 256;
  auto res = john_scan(half, lat, samples, w, xs, 0.25, 0.05, 2.0, &qs, eta, K);
  REQUIRE(res.t_q_members.size() >= 2);
  for (auto [xi, Q] : res.t_q_members) {
    auto region = whitney_region(w, lat, Q, eta, K, w.tau0 / 2);
    CHECK(region_contains(w, region, xs[xi]));
  }
  // size mismatch between samples and lattice is rejected
  auto small = sample_boundary(half, 128, 5);
  CHECK_THROWS_AS(john_scan(half, lat, small, w, xs, 0.25, 0.05, 2.0),
                  std::invalid_argument);
}

TEST_CASE("whitney-region meeting property along found carrots") {
  // Lemma: a λ-carrot from y in Q' to x in U_Q with ℓ(Q') <= 2^{-k0} ℓ(Q)
  // meets U_{Q'}.
  auto half = make_domain_tag<2>("half_space");
  auto samples = sample_boundary(half, 4096, 11);
  auto lat = build_lattice(samples, 6);
  auto w = decompose(half, 1.0 / 512);
  double eta = std::exp2(-24), K = 256;

  int Q = lat.cube_of[2][lat.grid().nearest(Vec<2>(0.0, 0.0))];
  auto regQ = whitney_region(w, lat, Q, eta, K, w.tau0 / 2);
  // x in U_Q: a point above the cube at ~half its scale
  Vec<2> x(lat.center_of(Q)[0], 0.45 * lat.ell_of(Q));
  REQUIRE(region_contains(w, regQ, x));

  int qfine = lat.cube_of[6][lat.grid().nearest(Vec<2>(0.1, 0.0))];
  REQUIRE(lat.ell_of(qfine) <= std::exp2(-4) * lat.ell_of(Q));
  auto regQp = whitney_region(w, lat, qfine, eta, K, w.tau0 / 2);
  Vec<2> y = lat.center_of(qfine);
  auto r = find_carrot(half, w, y, Vec<2>(0, 1), x, 0.2);
  REQUIRE(r.path.has_value());
  bool meets = false;
  for (const auto& v : r.path->vertices)
    if (region_contains(w, regQp, v)) meets = true;
  // also check densified interpolation points
  for (size_t i = 0; i + 1 < r.path->vertices.size() && !meets; ++i)
    for (double t = 0.1; t < 1.0; t += 0.1) {
      Vec<2> z = r.path->vertices[i] + t * (r.path->vertices[i + 1] - r.path->vertices[i]);
      if (region_contains(w, regQp, z)) meets = true;
    }
  CHECK(meets);
}

TEST_CASE("lambda_best is monotone under refinement") {
  auto slit = make_domain_tag<2>("slit_disk");
  Vec<2> y(0.5, 0.0), x(0.4, 0.25);
  auto coarse = decompose(slit, 1.0 / 128);
  auto fine = decompose(slit, 1.0 / 512);
  double lb_coarse = find_lambda_best(slit, coarse, y, Vec<2>(0, -1), x, 8);
  double lb_fine = find_lambda_best(slit, fine, y, Vec<2>(0, -1), x, 8);
  CHECK(lb_fine >= lb_coarse - 1e-6);  // finer graphs only add routes
}

TEST_CASE("wsbc detection") {
  // punctured plane along a full line: the two sides are disconnected
  auto line = make_domain<2>(R"({"type":"punctured_plane","params":{"full_line":true}})");
  auto lsm = sample_boundary(line, 4096, 3);
  auto llat = build_lattice(lsm, 5);
  auto lw = decompose(line, 1.0 / 256);
  SetDistance<2> ldist = [&](const Vec<2>& p) { return line.distance(p); };
  int Ql = llat.cube_of[4][llat.grid().nearest(Vec<2>(0.0, 0.0))];
  auto rl = wsbc_test(line, llat, lw, Ql, 100.0, 0.05, 4.0, 3.0, ldist);
  CHECK(rl.applicable);
  CHECK(rl.wsbc);

  // slit complement: deep inside the slit any chain to the other side must
  // grow from ℓ(Q) to the tip distance, so the achieved constant separates
  // deep cubes from cubes near the tip
  auto seg = make_domain<2>(R"({"type":"punctured_plane"})");
  auto ssm = sample_boundary(seg, 8192, 7);
  auto slat = build_lattice(ssm, 7);
  auto sw = decompose(seg, 1.0 / 4096);
  SetDistance<2> sdist = [&](const Vec<2>& p) { return seg.distance(p); };
  int deep = slat.cube_of[7][slat.grid().nearest(Vec<2>(0.5, 0.0))];
  auto rdeep = wsbc_test(seg, slat, sw, deep, 50.0, 0.2, 4.0, 3.0, sdist);
  CHECK(rdeep.applicable);
  CHECK(rdeep.wsbc);
  CHECK(rdeep.best_chain_C > 50.0);

  int near_tip = slat.cube_of[7][slat.grid().nearest(Vec<2>(0.9, 0.0))];
  auto rtip = wsbc_test(seg, slat, sw, near_tip, 50.0, 0.2, 4.0, 3.0, sdist);
  REQUIRE(rtip.applicable);
  CHECK(rtip.best_chain_C < 50.0);
  CHECK(!rtip.wsbc);

  // the searched chain is sound: it verifies at its achieved constant
  // (covered by construction through verify_chain inside wsbc_test)
}

TEST_CASE("cigar condition") {
  auto half = make_domain_tag<2>("half_space");
  std::vector<Vec<2>> straight{{0, 0}, {0, 1}};
  auto c1 = cigar_check(half, straight, 1.0);
  CHECK(c1.ok);

  // slit disk: a path straddling mid-slit around the tip fails at small M
  auto slit = make_domain_tag<2>("slit_disk");
  std::vector<Vec<2>> around{{0.5, 0.0},  {0.5, -0.15}, {1.1, -0.15},
                             {1.1, 0.15}, {0.5, 0.15},  {0.5, 0.3}};
  auto c2 = cigar_check(slit, around, 2.0);
  CHECK(!c2.ok);
  CHECK(c2.worst_M > 4.0);
  auto c3 = cigar_check(slit, around, 1e6);
  CHECK(c3.ok);
}

TEST_CASE("search soundness: returned paths verify at the requested λ") {
  auto slit = make_domain_tag<2>("slit_disk");
  auto ws = decompose(slit, 1.0 / 256);
  RngStream rng(31);
  int found = 0;
  for (int t = 0; t < 12; ++t) {
    Vec<2> x(0.8 * (2 * rng.uniform() - 1), 0.8 * (2 * rng.uniform() - 1));
    if (!slit.inside(x) || slit.distance(x) < 0.05) continue;
    Vec<2> y(rng.uniform(), 0.0);
    Vec<2> n(0, rng.uniform() < 0.5 ? 1.0 : -1.0);
    auto r = find_carrot(slit, ws, y, n, x, 0.02);
    if (!r.path) continue;
    ++found;
    auto v = verify_carrot(slit, r.path->vertices, 0.02);
    CHECK(v.ok);
  }
  CHECK(found >= 4);
}

TEST_CASE("exports") {
  CarrotPath<2> p;
  p.vertices = {{0, 0}, {0, 1}};
  p.lambda = 0.5;
  CHECK(path_to_json(p).find("lambda") != std::string::npos);
  HarnackChain<2> ch;
  ch.centers = {{0, 1}};
  ch.radii = {0.4};
  CHECK(chain_to_json(ch).find("balls") != std::string::npos);
}
