#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "quantconn/acf.hpp"

using namespace qc;

TEST_CASE("linear pair: planar closed form J_i = pi k_i^2 / 2") {
  auto pair = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, 1.3, 641);
  Vec<2> x(0, 0);
  for (double r : {0.25, 0.5, 1.0}) {
    auto v = acf_j(pair, x, r);
    CHECK(v.J1 == doctest::Approx(M_PI / 2).epsilon(0.02));
    CHECK(v.J2 == doctest::Approx(M_PI / 2).epsilon(0.02));
    CHECK(v.J == doctest::Approx(M_PI * M_PI / 4).epsilon(0.04));
  }

  // quadratic homogeneity: k1 -> 2 k1 scales J1 by 4
  auto scaled = linear_pair<2>(Vec<2>(0, 1), 2.0, 0.5, 1.3, 641);
  auto vs = acf_j(scaled, x, 0.5);
  CHECK(vs.J1 == doctest::Approx(4 * M_PI / 2).epsilon(0.02));
  CHECK(vs.J2 == doctest::Approx(0.25 * M_PI / 2).epsilon(0.02));

  // rotation invariance of the kernel
  Vec<2> e(std::cos(0.6), std::sin(0.6));
  auto rot = linear_pair<2>(e, 1.0, 1.0, 1.3, 641);
  auto vr = acf_j(rot, x, 0.5);
  CHECK(vr.J == doctest::Approx(M_PI * M_PI / 4).epsilon(0.04));
}

TEST_CASE("zero factor kills J") {
  auto pair = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, 1.0, 257);
  std::fill(pair.u2.begin(), pair.u2.end(), 0.0);
  auto v = acf_j(pair, Vec<2>(0, 0), 0.5);
  CHECK(v.J == 0.0);
  CHECK(v.J1 > 0.0);
}

TEST_CASE("disjoint supports and common zero hold on the catalog") {
  for (auto pair : {linear_pair<2>(Vec<2>(1, 0), 1, 2, 1.0, 129), wedge_pair(1.0, 129),
                    quadrant_pair(1.0, 129)}) {
    double prod = 0.0;
    for (long f = 0; f < pair.nodes(); ++f) prod = std::max(prod, pair.u1[f] * pair.u2[f]);
    CHECK(prod == 0.0);
    // the common zero sits at the grid midpoint for odd n
    long mid = (pair.n / 2) * (long)pair.n + pair.n / 2;
    CHECK(pair.u1[mid] == 0.0);
    CHECK(pair.u2[mid] == 0.0);
  }
}

TEST_CASE("upper bound J_i <= C r^{-2} sup^2") {
  auto pair = wedge_pair(1.2, 513);
  Vec<2> x(0, 0);
  for (double r : {0.25, 0.5, 1.0}) {
    auto v = acf_j(pair, x, r);
    double sup1 = 0.0, sup2 = 0.0;
    int idx[2];
    for (long f = 0; f < pair.nodes(); ++f) {
      idx[0] = static_cast<int>(f % pair.n);
      idx[1] = static_cast<int>(f / pair.n);
      if (pair.node(idx).norm() <= 2 * r) {
        sup1 = std::max(sup1, pair.u1[f]);
        sup2 = std::max(sup2, pair.u2[f]);
      }
    }
    double C = 40.0;  // measured headroom on the catalog
    CHECK(v.J1 <= C * sup1 * sup1 / (r * r));
    CHECK(v.J2 <= C * sup2 * sup2 / (r * r));
  }
}

TEST_CASE("monotonicity: constant on the equality case, strict on the wedge") {
  auto lin = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.5, 1.3, 641);
  std::vector<double> radii{0.2, 0.3, 0.45, 0.7, 1.0};
  auto scan = monotonicity_scan(lin, Vec<2>(0, 0), radii);
  CHECK(scan.violations == 0);
  // equality case: max-min within twice the quadrature error
  double lo = kInf, hi = 0, emax = 0;
  for (const auto& v : scan.values) {
    lo = std::min(lo, v.J);
    hi = std::max(hi, v.J);
    emax = std::max(emax, v.err);
  }
  CHECK(hi - lo <= 2 * emax);

  auto wedge = wedge_pair(1.3, 641);
  auto wscan = monotonicity_scan(wedge, Vec<2>(0, 0), radii);
  CHECK(wscan.violations == 0);
  for (size_t i = 0; i + 1 < radii.size(); ++i)
    CHECK(wscan.values[i + 1].J > wscan.values[i].J);  // strictly increasing

  auto quad = quadrant_pair(1.3, 641);
  auto qscan = monotonicity_scan(quad, Vec<2>(0, 0), radii);
  CHECK(qscan.violations == 0);

  // single radius: vacuously monotone
  auto one = monotonicity_scan(lin, Vec<2>(0, 0), {0.5});
  CHECK(one.violations == 0);
}

TEST_CASE("grid convergence within the Richardson estimate") {
  auto fine = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, 1.3, 641);
  auto half = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, 1.3, 321);
  auto vf = acf_j(fine, Vec<2>(0, 0), 0.5);
  auto vh = acf_j(half, Vec<2>(0, 0), 0.5);
  CHECK(std::abs(vf.J - vh.J) <= vf.err + vh.err);
}

TEST_CASE("3d linear pair: J_i = pi k_i^2") {
  auto pair = linear_pair<3>(Vec<3>(0, 0, 1), 1.0, 1.0, 0.8, 97);
  auto v = acf_j(pair, Vec<3>(0, 0, 0), 0.5);
  CHECK(v.J1 == doctest::Approx(M_PI).epsilon(0.06));
  CHECK(v.J2 == doctest::Approx(M_PI).epsilon(0.06));
}

TEST_CASE("binary grid round trip") {
  auto pair = wedge_pair(1.0, 65);
  std::string path = "/tmp/qc_acf_pair.bin";
  save_pair(pair, path);
  auto back = load_pair<2>(path);
  CHECK(back.n == pair.n);
  CHECK(back.R == pair.R);
  CHECK(back.u1 == pair.u1);
  CHECK(back.u2 == pair.u2);
  std::remove(path.c_str());
  CHECK_THROWS(load_pair<3>(path));
}

TEST_CASE("precondition checks") {
  auto pair = linear_pair<2>(Vec<2>(0, 1), 1.0, 1.0, 1.0, 129);
  CHECK_THROWS(acf_j(pair, Vec<2>(0, 0), 0.999));  // no margin on the grid
  CHECK_THROWS(acf_j(pair, Vec<2>(0, 0), 0.01));   // unresolved radius
  CHECK_THROWS(linear_pair<2>(Vec<2>(0, 1), 0.0, 1.0, 1.0, 65));
}
