#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "quantconn/domain.hpp"
#include "quantconn/lattice.hpp"

using namespace qc;

namespace {

std::vector<BoundarySample<2>> segment_samples(int n, double a = 0.0, double b = 1.0) {
  std::vector<BoundarySample<2>> s(n);
  for (int i = 0; i < n; ++i) {
    double t = a + (i + 0.5) / n * (b - a);
    s[i] = {{t, 0.0}, (b - a) / n, 0, {0, 1}};
  }
  return s;
}

void check_partition_and_nesting(const Lattice<2>& lat) {
  int n = static_cast<int>(lat.points.size());
  for (int k = 0; k <= lat.depth; ++k) {
    // partition: every sample in exactly one cube; member lists consistent
    std::vector<int> seen(n, 0);
    for (int c : lat.level_cubes[k]) {
      CHECK(!lat.members_of[c].empty());
      for (int s : lat.members_of[c]) {
        CHECK(lat.cube_of[k][s] == c);
        ++seen[s];
      }
    }
    for (int s = 0; s < n; ++s) CHECK(seen[s] == 1);
  }
  // nesting: a cube's samples are the union of its children's samples
  for (const auto& c : lat.cubes) {
    if (c.level == lat.depth) continue;
    std::set<int> mine(lat.members_of[c.id].begin(), lat.members_of[c.id].end());
    std::set<int> kids;
    for (int ch : c.children) {
      CHECK(lat.cubes[ch].parent == c.id);
      kids.insert(lat.members_of[ch].begin(), lat.members_of[ch].end());
    }
    CHECK(mine == kids);
  }
}

}  // namespace

TEST_CASE("segment lattice: dyadic intervals") {
  auto lat = build_lattice(segment_samples(1024), 3);
  CHECK(lat.ell0 == 1.0);
  CHECK(lat.level_cubes[3].size() == 8);
  // cells converge to the dyadic intervals up to the recentering residual
  for (int c : lat.level_cubes[3])
    CHECK(lat.cubes[c].sigma == doctest::Approx(1.0 / 8).epsilon(0.03));
  check_partition_and_nesting(lat);

  // σ additivity is exact by construction
  for (const auto& c : lat.cubes) {
    if (c.level == lat.depth) continue;
    double s = 0.0;
    for (int ch : c.children) s += lat.cubes[ch].sigma;
    CHECK(c.sigma == s);
  }
}

TEST_CASE("cube geometry: ball convention r(B_Q) = 4 l(Q)") {
  auto lat = build_lattice(segment_samples(512), 3);
  for (int c : lat.level_cubes[2]) {
    auto g = cube_geometry(lat, c);
    CHECK(g.ball_radius == doctest::Approx(4.0 * g.ell));
    CHECK(g.r_inner > 0.0);
  }
  CHECK_THROWS(cube_geometry(lat, 10'000'000));
}

TEST_CASE("circle lattice: equal arcs per level") {
  auto disk = make_domain_tag<2>("disk");
  auto samples = sample_boundary(disk, 4096, 11);
  auto lat = build_lattice(samples, 4);
  check_partition_and_nesting(lat);
  // root scale: circle diameter 2 -> ell0 = 2; level-k cubes are arcs
  for (int k = 3; k <= 4; ++k) {
    double lo = kInf, hi = 0.0;
    for (int c : lat.level_cubes[k]) {
      lo = std::min(lo, lat.cubes[c].sigma);
      hi = std::max(hi, lat.cubes[c].sigma);
    }
    CHECK(hi / lo <= 4.0);  // comparable arc masses
  }
}

TEST_CASE("four-corners stage-4 lattice matches the 4-ary Cantor tree") {
  auto fc = make_domain<2>(R"({"type":"four_corners","params":{"k_max":4}})");
  auto all = sample_boundary(fc, 6000, 3);
  // keep only the stage-4 block (patch id 4, window x >= 7.5)
  std::vector<BoundarySample<2>> samples;
  for (const auto& s : all)
    if (s.patch == 4) samples.push_back(s);
  REQUIRE(samples.size() > 500);
  auto lat = build_lattice(samples, 4);
  check_partition_and_nesting(lat);
  // Dyadic levels 2 and 4 correspond to Cantor stages 1 and 2.
  CHECK(lat.level_cubes[2].size() == 4);
  CHECK(lat.level_cubes[4].size() == 16);
  for (int c : lat.level_cubes[2]) CHECK(lat.cubes[c].sigma == doctest::Approx(1.0).epsilon(1e-9));
  for (int c : lat.level_cubes[4]) CHECK(lat.cubes[c].sigma == doctest::Approx(0.25).epsilon(1e-9));
  for (int c : lat.level_cubes[4]) {
    int p = lat.cubes[lat.cubes[c].parent].parent;
    // the stage-2 cell sits inside its stage-1 cell geometrically
    Vec<2> cc = lat.center_of(c), pc = lat.center_of(p);
    CHECK((cc - pc).lpNorm<Eigen::Infinity>() <= 0.25 + 1e-12);
  }
}

TEST_CASE("relatives: descendants and dilation") {
  auto lat = build_lattice(segment_samples(1024), 4);
  int root = lat.root();
  CHECK(relatives(lat, root, Relation::descendants_at, 2).size() == 4);
  CHECK(relatives(lat, root, Relation::parent).empty());

  // find the level-2 cube holding samples of [1/4, 3/8): centers near 5/16
  int q = lat.cube_of[2][lat.grid().nearest(Vec<2>(0.3, 0.0))];
  // dilate(1) is exactly the cube's own samples
  auto own = relatives(lat, q, Relation::dilate, 1.0);
  CHECK(own.size() == lat.members_of[q].size());

  // dilate(2): brute-force oracle over all samples
  auto dil = relatives(lat, q, Relation::dilate, 2.0);
  std::set<int> got(dil.begin(), dil.end());
  double ell = lat.ell_of(q);
  std::set<int> expect;
  for (int s = 0; s < static_cast<int>(lat.points.size()); ++s) {
    double d = kInf;
    for (int m : lat.members_of[q]) d = std::min(d, (lat.points[s] - lat.points[m]).norm());
    if (d <= ell) expect.insert(s);
  }
  CHECK(got == expect);
}

TEST_CASE("measured grid-lemma constants are uniform across levels") {
  auto graph = make_domain_tag<2>("lipschitz_graph");
  auto lat = build_lattice(sample_boundary(graph, 4096, 9), 6);
  auto stats = lattice_stats(lat);
  double a0_min = kInf, a0_max = 0, c1_min = kInf, c1_max = 0;
  for (int k = 2; k <= lat.depth; ++k) {
    a0_min = std::min(a0_min, stats[k].a0);
    a0_max = std::max(a0_max, stats[k].a0);
    c1_min = std::min(c1_min, stats[k].c1);
    c1_max = std::max(c1_max, stats[k].c1);
  }
  CHECK(a0_max / a0_min <= 4.0);
  CHECK(c1_max / c1_min <= 4.0);
  CHECK(c1_max <= 4.0);  // diam(Q) <= C1 * 2^{-k} with small C1

  // thin boundary: fraction within θ ℓ(Q) of the complement decays in θ with
  // a positive fitted exponent
  int lvl = lat.depth - 1;
  double f2 = thin_boundary_fraction(lat, lvl, 0.25);
  double f3 = thin_boundary_fraction(lat, lvl, 0.125);
  double f4 = thin_boundary_fraction(lat, lvl, 0.0625);
  CHECK(f4 <= f3);
  CHECK(f3 <= f2);
  REQUIRE(f4 > 0.0);
  double s_fit = std::log2(f2 / f4) / 2.0;
  CHECK(s_fit > 0.0);
}

TEST_CASE("degenerate input rejected") {
  std::vector<BoundarySample<2>> bad(10, {{0.5, 0.5}, 0.1, 0, {0, 1}});
  CHECK_THROWS_AS(build_lattice(bad, 3), std::invalid_argument);
  CHECK_THROWS_AS(build_lattice(segment_samples(8), 15), std::invalid_argument);
}

TEST_CASE("lattice json export") {
  auto lat = build_lattice(segment_samples(64), 2);
  auto js = lattice_to_json(lat);
  CHECK(js.find("\"sigma\"") != std::string::npos);
  CHECK(js.find("\"children\"") != std::string::npos);
}
