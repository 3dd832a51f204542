#pragma once

#include <string>
#include <vector>

#include "quantconn/geometry.hpp"

namespace qc {

/// Two nonnegative fields with disjoint supports on a regular node grid over
/// the cube [-R, R]^D around the common zero; D = 2 is the planar case
/// (kernel 1), D = 3 carries the |y-x|^{-1} kernel.
template <int D>
struct AcfPair {
  int n = 0;        // nodes per axis
  double R = 0.0;   // half-extent; spacing h = 2R/(n-1)
  Vec<D> origin = Vec<D>::Zero();
  std::vector<double> u1, u2;  // row-major node values

  double h() const { return 2 * R / (n - 1); }
  long nodes() const {
    long t = 1;
    for (int a = 0; a < D; ++a) t *= n;
    return t;
  }
  Vec<D> node(const int* idx) const {
    Vec<D> p = origin;
    for (int a = 0; a < D; ++a) p[a] += -R + idx[a] * h();
    return p;
  }
};

struct AcfValue {
  double J1 = 0.0, J2 = 0.0, J = 0.0;
  double err = 0.0;  // Richardson estimate between h and 2h
};

/// J_i(x,r) = (1/r^2) ∫_{B(x,r)} |∇u_i|^2 / |y-x|^{D-2} dy and J = J1 J2.
/// Central-difference gradients on cells; partial cells weighted by
/// subsampling; in 3D the 2h-core is excised and bounded analytically.
template <int D>
AcfValue acf_j(const AcfPair<D>& pair, const Vec<D>& x, double r);

struct MonotonicityScan {
  std::vector<double> radii;
  std::vector<AcfValue> values;
  int violations = 0;       // decreases beyond the combined quadrature error
  double worst_drop = 0.0;  // most negative error-adjusted increment
};

template <int D>
MonotonicityScan monotonicity_scan(const AcfPair<D>& pair, const Vec<D>& x,
                                   const std::vector<double>& radii);

/// u1 = k1 ((y-x)·e)^+, u2 = k2 ((y-x)·e)^- -- the equality case.
template <int D>
AcfPair<D> linear_pair(const Vec<D>& e, double k1, double k2, double R, int n);

/// Harmonic positive parts on complementary wedges of openings 3π/2 and π/2
/// (planar); J increases strictly in r.
AcfPair<2> wedge_pair(double R, int n);

/// u1 = (xy)^+, u2 = (xy)^-: positive parts of a harmonic polynomial on
/// opposite quadrant pairs.
AcfPair<2> quadrant_pair(double R, int n);

/// Plain binary grid file: magic, dim, nodes, origin, extent, u1, u2.
template <int D>
void save_pair(const AcfPair<D>& pair, const std::string& path);
template <int D>
AcfPair<D> load_pair(const std::string& path);

/// CSV of a scan: r, J1, J2, J, err.
std::string scan_to_csv(const MonotonicityScan& scan);

}  // namespace qc
