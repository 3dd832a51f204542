#include "quantconn/acf.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qc {

namespace {
constexpr double kPi = std::numbers::pi;

template <int D>
long flat_index(const AcfPair<D>& p, const int* idx) {
  long f = 0;
  for (int a = D - 1; a >= 0; --a) f = f * p.n + idx[a];
  return f;
}

/// Integrates |∇u|^2 (times the kernel in 3D) over B(x,r) with cell-centered
/// central differences at the given stride (1 for h, 2 for the Richardson
/// companion at 2h).
template <int D>
double dirichlet_energy(const AcfPair<D>& p, const std::vector<double>& u, const Vec<D>& x,
                        double r, int stride, double* core_bound) {
  double h = p.h() * stride;
  int cells = (p.n - 1) / stride;
  double total = 0.0;
  double max_grad2_core = 0.0;
  int idx[D == 2 ? 2 : 3];

  auto cell_value = [&](const int* ci) {
    // gradient from the 2^D corner nodes at the given stride
    double grad2 = 0.0;
    Vec<D> centre = Vec<D>::Zero();
    int corner[3];
    if constexpr (D == 2) {
      int i = ci[0] * stride, j = ci[1] * stride;
      auto v = [&](int di, int dj) {
        corner[0] = i + di * stride;
        corner[1] = j + dj * stride;
        return u[flat_index(p, corner)];
      };
      double dx = (v(1, 0) - v(0, 0) + v(1, 1) - v(0, 1)) / (2 * h);
      double dy = (v(0, 1) - v(0, 0) + v(1, 1) - v(1, 0)) / (2 * h);
      grad2 = dx * dx + dy * dy;
      corner[0] = i;
      corner[1] = j;
      centre = p.node(corner) + Vec<D>::Constant(h / 2);
    } else {
      int i = ci[0] * stride, j = ci[1] * stride, k = ci[2] * stride;
      auto v = [&](int di, int dj, int dk) {
        corner[0] = i + di * stride;
        corner[1] = j + dj * stride;
        corner[2] = k + dk * stride;
        return u[flat_index(p, corner)];
      };
      double dx = (v(1, 0, 0) - v(0, 0, 0) + v(1, 1, 0) - v(0, 1, 0) + v(1, 0, 1) - v(0, 0, 1) +
                   v(1, 1, 1) - v(0, 1, 1)) /
                  (4 * h);
      double dy = (v(0, 1, 0) - v(0, 0, 0) + v(1, 1, 0) - v(1, 0, 0) + v(0, 1, 1) - v(0, 0, 1) +
                   v(1, 1, 1) - v(1, 0, 1)) /
                  (4 * h);
      double dz = (v(0, 0, 1) - v(0, 0, 0) + v(1, 0, 1) - v(1, 0, 0) + v(0, 1, 1) - v(0, 1, 0) +
                   v(1, 1, 1) - v(1, 1, 0)) /
                  (4 * h);
      grad2 = dx * dx + dy * dy + dz * dz;
      corner[0] = i;
      corner[1] = j;
      corner[2] = k;
      centre = p.node(corner) + Vec<D>::Constant(h / 2);
    }
    double d = (centre - x).norm();
    double cell_diam = h * std::sqrt(static_cast<double>(D));
    if (d > r + cell_diam) return;
    if constexpr (D == 3) {
      if (d <= 2 * p.h() + cell_diam) {
        max_grad2_core = std::max(max_grad2_core, grad2);
        return;  // excised core, added analytically below
      }
    }
    // partial-cell weight by midpoint subsampling
    double w = 1.0;
    if (d + cell_diam / 2 > r) {
      int in = 0, sub = D == 2 ? 4 : 2;
      int total_sub = 1;
      for (int a = 0; a < D; ++a) total_sub *= sub;
      for (int q = 0; q < total_sub; ++q) {
        int t = q;
        Vec<D> z = centre - Vec<D>::Constant(h / 2);
        for (int a = 0; a < D; ++a) {
          z[a] += (t % sub + 0.5) * h / sub;
          t /= sub;
        }
        if ((z - x).norm() <= r) ++in;
      }
      w = static_cast<double>(in) / total_sub;
      if (w == 0) return;
    }
    double kernel = D == 2 ? 1.0 : 1.0 / std::max(d, p.h());
    total += grad2 * kernel * w;
  };

  if constexpr (D == 2) {
    for (idx[0] = 0; idx[0] < cells; ++idx[0])
      for (idx[1] = 0; idx[1] < cells; ++idx[1]) cell_value(idx);
  } else {
    for (idx[0] = 0; idx[0] < cells; ++idx[0])
      for (idx[1] = 0; idx[1] < cells; ++idx[1])
        for (idx[2] = 0; idx[2] < cells; ++idx[2]) cell_value(idx);
  }
  double vol_cell = std::pow(h, D);
  double result = total * vol_cell;
  if constexpr (D == 3) {
    // ∫_{|y|<=2h} |y|^{-1} dy = 2π (2h)^2 bounds the excised core
    double core = max_grad2_core * 2 * kPi * 4 * p.h() * p.h();
    result += 0.5 * core;
    if (core_bound) *core_bound += core;
  } else {
    (void)core_bound;
  }
  return result;
}

}  // namespace

template <int D>
AcfValue acf_j(const AcfPair<D>& pair, const Vec<D>& x, double r) {
  if (pair.n < 3) throw std::invalid_argument("acf_j: grid too small");
  if (r > pair.R - 2 * pair.h())
    throw std::invalid_argument("acf_j: radius does not fit the grid");
  if (r / pair.h() < 8) throw std::invalid_argument("acf_j: grid does not resolve the radius");

  AcfValue out;
  double core1 = 0.0, core2 = 0.0;
  double e1 = dirichlet_energy<D>(pair, pair.u1, x, r, 1, &core1);
  double e2 = dirichlet_energy<D>(pair, pair.u2, x, r, 1, &core2);
  out.J1 = e1 / (r * r);
  out.J2 = e2 / (r * r);
  out.J = out.J1 * out.J2;
  // Richardson companion on the twice-coarser cells
  double e1c = dirichlet_energy<D>(pair, pair.u1, x, r, 2, nullptr);
  double e2c = dirichlet_energy<D>(pair, pair.u2, x, r, 2, nullptr);
  double dJ1 = std::abs(e1 - e1c) / (r * r) + 0.5 * core1 / (r * r);
  double dJ2 = std::abs(e2 - e2c) / (r * r) + 0.5 * core2 / (r * r);
  out.err = dJ1 * out.J2 + dJ2 * out.J1 + dJ1 * dJ2;
  return out;
}

template <int D>
MonotonicityScan monotonicity_scan(const AcfPair<D>& pair, const Vec<D>& x,
                                   const std::vector<double>& radii) {
  MonotonicityScan scan;
  scan.radii = radii;
  for (double r : radii) scan.values.push_back(acf_j(pair, x, r));
  for (size_t i = 0; i + 1 < radii.size(); ++i) {
    double drop = scan.values[i].J - scan.values[i + 1].J;
    double budget = scan.values[i].err + scan.values[i + 1].err;
    if (drop > budget) {
      ++scan.violations;
      scan.worst_drop = std::max(scan.worst_drop, drop - budget);
    }
  }
  return scan;
}

template <int D>
AcfPair<D> linear_pair(const Vec<D>& e, double k1, double k2, double R, int n) {
  if (!(k1 > 0 && k2 > 0)) throw std::invalid_argument("linear_pair: need k1, k2 > 0");
  AcfPair<D> p;
  p.n = n;
  p.R = R;
  p.u1.assign(p.nodes(), 0.0);
  p.u2.assign(p.nodes(), 0.0);
  Vec<D> en = e.normalized();
  int idx[3] = {0, 0, 0};
  for (long f = 0; f < p.nodes(); ++f) {
    long t = f;
    for (int a = 0; a < D; ++a) {
      idx[a] = static_cast<int>(t % p.n);
      t /= p.n;
    }
    double s = p.node(idx).dot(en);
    p.u1[f] = k1 * std::max(s, 0.0);
    p.u2[f] = k2 * std::max(-s, 0.0);
  }
  return p;
}

AcfPair<2> wedge_pair(double R, int n) {
  AcfPair<2> p;
  p.n = n;
  p.R = R;
  p.u1.assign(p.nodes(), 0.0);
  p.u2.assign(p.nodes(), 0.0);
  int idx[2];
  for (long f = 0; f < p.nodes(); ++f) {
    idx[0] = static_cast<int>(f % n);
    idx[1] = static_cast<int>(f / n);
    Vec<2> y = p.node(idx);
    double rho = y.norm();
    if (rho == 0) continue;
    double th = std::atan2(y[1], y[0]);
    if (th < 0) th += 2 * kPi;
    if (th < 1.5 * kPi) {
      p.u1[f] = std::pow(rho, 2.0 / 3.0) * std::sin(th * 2.0 / 3.0);
    } else {
      p.u2[f] = rho * rho * std::sin(2.0 * (th - 1.5 * kPi));
    }
  }
  return p;
}

AcfPair<2> quadrant_pair(double R, int n) {
  AcfPair<2> p;
  p.n = n;
  p.R = R;
  p.u1.assign(p.nodes(), 0.0);
  p.u2.assign(p.nodes(), 0.0);
  int idx[2];
  for (long f = 0; f < p.nodes(); ++f) {
    idx[0] = static_cast<int>(f % n);
    idx[1] = static_cast<int>(f / n);
    Vec<2> y = p.node(idx);
    double v = y[0] * y[1];
    p.u1[f] = std::max(v, 0.0);
    p.u2[f] = std::max(-v, 0.0);
  }
  return p;
}

template <int D>
void save_pair(const AcfPair<D>& pair, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_pair: cannot open " + path);
  const char magic[4] = {'A', 'C', 'F', 'G'};
  os.write(magic, 4);
  int32_t dim = D, n = pair.n;
  os.write(reinterpret_cast<const char*>(&dim), 4);
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&pair.R), 8);
  os.write(reinterpret_cast<const char*>(pair.origin.data()), 8 * D);
  os.write(reinterpret_cast<const char*>(pair.u1.data()), 8 * pair.u1.size());
  os.write(reinterpret_cast<const char*>(pair.u2.data()), 8 * pair.u2.size());
}

template <int D>
AcfPair<D> load_pair(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_pair: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "ACFG", 4) != 0) throw std::runtime_error("load_pair: bad magic");
  int32_t dim, n;
  is.read(reinterpret_cast<char*>(&dim), 4);
  is.read(reinterpret_cast<char*>(&n), 4);
  if (dim != D) throw std::runtime_error("load_pair: dimension mismatch");
  AcfPair<D> pair;
  pair.n = n;
  is.read(reinterpret_cast<char*>(&pair.R), 8);
  is.read(reinterpret_cast<char*>(pair.origin.data()), 8 * D);
  pair.u1.resize(pair.nodes());
  pair.u2.resize(pair.nodes());
  is.read(reinterpret_cast<char*>(pair.u1.data()), 8 * pair.u1.size());
  is.read(reinterpret_cast<char*>(pair.u2.data()), 8 * pair.u2.size());
  if (!is) throw std::runtime_error("load_pair: truncated file");
  return pair;
}

std::string scan_to_csv(const MonotonicityScan& scan) {
  std::ostringstream os;
  os.precision(12);
  os << "r,J1,J2,J,err\n";
  for (size_t i = 0; i < scan.radii.size(); ++i)
    os << scan.radii[i] << "," << scan.values[i].J1 << "," << scan.values[i].J2 << ","
       << scan.values[i].J << "," << scan.values[i].err << "\n";
  return os.str();
}

template struct AcfPair<2>;
template struct AcfPair<3>;
template AcfValue acf_j<2>(const AcfPair<2>&, const Vec<2>&, double);
template AcfValue acf_j<3>(const AcfPair<3>&, const Vec<3>&, double);
template MonotonicityScan monotonicity_scan<2>(const AcfPair<2>&, const Vec<2>&,
                                               const std::vector<double>&);
template MonotonicityScan monotonicity_scan<3>(const AcfPair<3>&, const Vec<3>&,
                                               const std::vector<double>&);
template AcfPair<2> linear_pair<2>(const Vec<2>&, double, double, double, int);
template AcfPair<3> linear_pair<3>(const Vec<3>&, double, double, double, int);
template void save_pair<2>(const AcfPair<2>&, const std::string&);
template void save_pair<3>(const AcfPair<3>&, const std::string&);
template AcfPair<2> load_pair<2>(const std::string&);
template AcfPair<3> load_pair<3>(const std::string&);

}  // namespace qc
