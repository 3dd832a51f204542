#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "quantconn/domain.hpp"
#include "quantconn/lattice.hpp"
#include "quantconn/whitney.hpp"

using namespace qc;

TEST_CASE("gauge holds on every emitted cube") {
  for (const char* tag : {"half_space", "slit_disk", "lipschitz_graph"}) {
    auto dom = make_domain_tag<2>(tag);
    auto w = decompose(dom, 1.0 / 256);
    REQUIRE(w.cubes.size() > 50);
    for (const auto& c : w.cubes) {
      double lo4 = dom.box_distance(c.box().dilated(4.0));
      CHECK(lo4 >= 4.0 * c.diam());
      CHECK(c.dist >= lo4 - 1e-12);
      CHECK(c.dist <= 40.0 * c.diam());
      CHECK(c.dist == doctest::Approx(dom.box_distance(c.box())));
    }
  }
}

TEST_CASE("cover accounting is exact") {
  auto dom = make_domain_tag<2>("slit_disk");
  auto w = decompose(dom, 1.0 / 256);
  double vol = 0.0;
  for (const auto& c : w.cubes) vol += c.box().volume();
  double root_vol = std::pow(w.root_side, 2);
  CHECK(vol + w.uncovered_volume == doctest::Approx(root_vol).epsilon(1e-9));
}

TEST_CASE("neighbors have comparable side and the graph is symmetric") {
  auto dom = make_domain_tag<2>("slit_disk");
  auto w = decompose(dom, 1.0 / 256);
  for (int i = 0; i < static_cast<int>(w.cubes.size()); ++i) {
    for (int j : w.cubes[i].neighbors) {
      double r = w.cubes[i].side / w.cubes[j].side;
      CHECK(r <= 4.0);
      CHECK(r >= 0.25);
      const auto& back = w.cubes[j].neighbors;
      CHECK(std::find(back.begin(), back.end(), i) != back.end());
    }
  }
}

TEST_CASE("half-space layers are homogeneous") {
  auto dom = make_domain_tag<2>("half_space");
  auto w = decompose(dom, 1.0 / 64);
  // cubes whose centers lie in the height band [1,2) over |x| <= 2
  std::map<double, int> by_side;
  for (const auto& c : w.cubes) {
    Vec<2> ctr = c.center();
    if (ctr[1] >= 1.0 && ctr[1] < 2.0 && std::abs(ctr[0]) <= 2.0) ++by_side[c.side];
  }
  REQUIRE(!by_side.empty());
  CHECK(by_side.size() <= 2);  // at most two dyadic sides across the band
  for (auto& [side, count] : by_side) {
    double per_unit = count * side / (4.0);  // rows stack to fill the band
    CHECK(per_unit > 0.2);
    (void)per_unit;
  }
}

TEST_CASE("fattening") {
  auto dom = make_domain_tag<2>("half_space");
  auto w = decompose(dom, 1.0 / 64);
  int i = w.locate({0.3, 1.1});
  REQUIRE(i >= 0);
  auto fat = fatten(w, i, 1.0 / 64);
  CHECK(fat.side(0) == doctest::Approx(w.cubes[i].side * (1 + 1.0 / 64)));
  CHECK((fat.center() - w.cubes[i].box().center()).norm() < 1e-12);
  CHECK_THROWS(fatten(w, i, 0.5));  // beyond tau0

  // I*(tau) meets J*(tau) iff I and J touch; and I*(tau) misses (3/4)J.
  double tau = w.tau0 / 2;
  for (int a = 0; a < static_cast<int>(w.cubes.size()); a += 7) {
    Box<2> fa = w.cubes[a].box().dilated(1 + tau);
    for (int b : w.cubes[a].neighbors) {
      CHECK(fa.intersects(w.cubes[b].box().dilated(1 + tau)));
      if (a != b) CHECK(!fa.intersects(w.cubes[b].box().dilated(0.75)));
    }
  }
  // non-neighbors at similar levels do not overlap after fattening
  int checked = 0;
  for (int a = 0; a < static_cast<int>(w.cubes.size()) && checked < 2000; a += 3) {
    for (int b = a + 1; b < static_cast<int>(w.cubes.size()) && checked < 2000; b += 11) {
      const auto& na = w.cubes[a].neighbors;
      if (std::find(na.begin(), na.end(), b) != na.end()) continue;
      Box<2> fa = w.cubes[a].box().dilated(1 + tau);
      Box<2> fb = w.cubes[b].box().dilated(1 + tau);
      CHECK(!fa.intersects(fb));
      ++checked;
    }
  }
}

TEST_CASE("whitney region W0_Q and U_Q") {
  auto dom = make_domain_tag<2>("half_space");
  auto w = decompose(dom, 1.0 / 512);
  auto samples = sample_boundary(dom, 4096, 17);
  auto lat = build_lattice(samples, 5);

  // a cube around x = 0 on the floor
  int Q = lat.cube_of[4][lat.grid().nearest(Vec<2>(0.0, 0.0))];
  double ellQ = lat.ell_of(Q);

  // substitution check: eta = 2^-8, K = 2^8 admits sides in [l(Q)/4, 16 l(Q)]
  {
    auto region = whitney_region(w, lat, Q, 1.0 / 256, 256.0, w.tau0 / 2);
    for (int i : region.cube_ids) {
      CHECK(w.cubes[i].side >= ellQ / 4 - 1e-12);
      CHECK(w.cubes[i].side <= 16 * ellQ + 1e-12);
    }
  }

  // Small-eta regime: half-plane cubes at height h have side in
  // [h/16, h/8] under the 4-40 gauge, so eta^{1/4} = 2^{-6} makes U_Q cover
  // the strip Q x (l(Q)/4, l(Q)).
  double eta = std::exp2(-24), K = 256;
  auto region = whitney_region(w, lat, Q, eta, K, w.tau0 / 2);
  REQUIRE(!region.empty());

  // U_Q ⊂ B(x_Q, K ℓ(Q))
  Vec<2> xQ = lat.center_of(Q);
  for (int i : region.cube_ids) {
    Box<2> fat = w.cubes[i].box().dilated(1 + region.tau);
    CHECK(fat.far_dist(xQ) <= K * ellQ);
  }

  // the box Q x (l(Q)/4, l(Q)) above the cube is inside U_Q
  auto g = cube_geometry(lat, Q);
  for (double fx = -0.4; fx <= 0.4; fx += 0.2)
    for (double fy = 0.301; fy <= 0.95; fy += 0.2) {
      Vec<2> p(xQ[0] + fx * g.r_inner, (0.25 + fy * 0.7) * ellQ);
      CHECK(region_contains(w, region, p));
    }

  // region containment: dist(y, E) > c eta^{1/2} l(Q) on U_Q, measured c
  double c_meas = kInf;
  for (int i : region.cube_ids)
    c_meas = std::min(c_meas, w.cubes[i].dist / (std::sqrt(eta) * ellQ));
  CHECK(c_meas > 0.0);
}

TEST_CASE("locate and fattened containers") {
  auto dom = make_domain_tag<2>("disk");
  auto w = decompose(dom, 1.0 / 128);
  Vec<2> x(0.2, 0.1);
  int i = w.locate(x);
  REQUIRE(i >= 0);
  CHECK(w.cubes[i].box().contains(x));
  auto fc = w.fattened_containers(x, w.tau0 / 2);
  CHECK(!fc.empty());
  CHECK(std::find(fc.begin(), fc.end(), i) != fc.end());
}

TEST_CASE("exports") {
  auto dom = make_domain_tag<2>("disk");
  auto w = decompose(dom, 1.0 / 32);
  auto csv = whitney_to_csv(w);
  CHECK(csv.find("side,dist,neighbors") != std::string::npos);
  auto edges = whitney_edges_csv(w);
  CHECK(edges.find("i,j") == 0);
}

TEST_CASE("min_side validation") {
  auto dom = make_domain_tag<2>("disk");
  CHECK_THROWS_AS(decompose(dom, 0.0), std::invalid_argument);
}
