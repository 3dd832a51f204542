#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quantconn/domain.hpp"
#include "quantconn/geometry.hpp"
#include "quantconn/lattice.hpp"
#include "quantconn/whitney.hpp"

namespace qc {

/// Deterministic splittable RNG stream.
struct RngStream {
  uint64_t state;
  explicit RngStream(uint64_t seed) : state(seed * 0x9e3779b97f4a7c15ull + 0x853c49e6748fea9bull) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  RngStream r(seed ^ (0x5851f42d4c957f2dull * (stream + 1)));
  return r.next();
}

struct WosConfig {
  double shell_rel = 1e-4;   // absorption shell = shell_rel * diam(bbox)
  long max_steps = 1'000'000;
  int shards = 16;
  int threads = 0;           // 0: QUANTCONN_THREADS env, else hardware
};

int worker_count(const WosConfig& cfg);

/// Monte Carlo value with reproducibility metadata; re-running with the same
/// (seed, shards) gives the identical value bit for bit.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  long n_walks = 0;
  uint64_t seed = 0;
  int shards = 0;
  long capped = 0;  // walks stopped at the step cap, tallied as non-events

  std::string to_json() const;
};

template <int D>
struct WalkOutcome {
  Vec<D> exit;   // absorption point projected to the boundary
  int patch = -1;
  bool capped = false;
};

/// Runs the walk-on-spheres ensemble; outcomes grouped by shard, each shard
/// driven by its own derived stream, so the result does not depend on the
/// worker count.
template <int D>
std::vector<std::vector<WalkOutcome<D>>> wos_ensemble(const Domain<D>& dom, const Vec<D>& p,
                                                      long n_walks, uint64_t seed,
                                                      const WosConfig& cfg);

template <int D>
using BoundaryEvent = std::function<bool(const Vec<D>&, int patch)>;

/// ω^p(event) as the hit frequency of absorbed walks.  When `shell_bias` is
/// given, a second ensemble at half the shell width estimates the projection
/// bias (value - half-shell value).
template <int D>
Estimate harmonic_measure(const Domain<D>& dom, const Vec<D>& p, const BoundaryEvent<D>& event,
                          long n_walks, uint64_t seed, const WosConfig& cfg = {},
                          double* shell_bias = nullptr);

/// Green function estimate g(p,q) = Φ(p-q) - E^p[Φ(X_exit - q)].
template <int D>
Estimate green(const Domain<D>& dom, const Vec<D>& p, const Vec<D>& q, long n_walks, uint64_t seed,
               const WosConfig& cfg = {});

/// Fundamental solution of the Laplacian in R^D.
template <int D>
double fundamental_solution(double r);

/// One ensemble scored against every lattice cube:  ω(Q), ω(2Q) and the
/// density quotients with per-cube standard errors.
template <int D>
struct DensityMap {
  std::vector<double> omega, omega2;        // per cube id: ω(Q), ω(2Q)
  std::vector<double> se_omega, se_omega2;  // binomial standard errors
  std::vector<double> sigma2;               // σ(2Q)
  long n_walks = 0;
  long off_lattice = 0;  // absorbed walks (incl. capped) outside sample reach

  double ratio(const Lattice<D>& lat, int cube) const {
    return lat.cubes[cube].sigma > 0 ? omega[cube] / lat.cubes[cube].sigma : 0.0;
  }
  double ratio2(int cube) const { return sigma2[cube] > 0 ? omega2[cube] / sigma2[cube] : 0.0; }
};

template <int D>
DensityMap<D> density_map(const Lattice<D>& lat, const Domain<D>& dom, const Vec<D>& p,
                          long n_walks, uint64_t seed, const WosConfig& cfg = {});

/// CSV matrix keyed by cube id: level, sigma, omega, omega2 and errors.
template <int D>
std::string density_map_to_csv(const Lattice<D>& lat, const DensityMap<D>& dm);

/// High/low density classification against the root cube R0.
struct HdLdReport {
  std::vector<int> hd, ld;     // maximal cube ids
  std::vector<char> good;      // per cube id: not contained in any HD/LD cube
  double sigma_BH = 0.0, sigma_BL = 0.0, sigma_G0 = 0.0, sigma_R0 = 0.0;
  double omega_BH = 0.0, omega_BL = 0.0, omega_G0 = 0.0, omega_R0 = 0.0;
  double omega_se = 0.0;  // common scale of the ω standard errors
  std::vector<int> g0_samples;
};

template <int D>
HdLdReport classify_hd_ld(const Lattice<D>& lat, const Domain<D>& dom, const Vec<D>& p, int R0,
                          double A, long n_walks, uint64_t seed, const WosConfig& cfg = {});

/// Local weak-A∞ probe: for each δ0 the adversarial cube-union E ⊂ B with
/// σ(E) <= δ0 σ(B∩∂Ω), built greedily from finest-level cubes sorted by ω/σ,
/// and ε0 = ω^p(E)/ω^p(2B).
struct WeakAinftyPoint {
  double delta0 = 0.0;
  double eps0 = 0.0;
  double sigma_E = 0.0;
  double omega_E = 0.0;
};

template <int D>
std::vector<WeakAinftyPoint> weak_ainfty_probe(const Domain<D>& dom, const Lattice<D>& lat,
                                               const Vec<D>& center, double r, const Vec<D>& p,
                                               const std::vector<double>& delta0_grid, long n_walks,
                                               uint64_t seed, const WosConfig& cfg = {});

struct WaResult {
  bool member = false;
  double worst_margin = 0.0;  // min over radii/sides of slack ratio; >= 1 passes
  double binding_r = 0.0;
};

/// Two-sided WA(p,Λ) membership test over the radius grid.
template <int D>
WaResult wa_test(const Domain<D>& dom, const Vec<D>& x0, const Vec<D>& p, double Lambda,
                 const std::vector<double>& r_grid, long n_walks, uint64_t seed,
                 const WosConfig& cfg = {});

template <int D>
struct GoodCorkscrew {
  bool found = false;
  Vec<D> point = Vec<D>::Zero();
  Estimate green_value;
};

/// Searches the Whitney cubes of W^0_Q for a κ-corkscrew z in 2 B_Q with
/// estimated g(p,z) > λ ℓ(Q)/σ(R0).
template <int D>
GoodCorkscrew<D> good_corkscrew(const Lattice<D>& lat, const Domain<D>& dom,
                                const WhitneyDecomposition<D>& w, int Q, const Vec<D>& p,
                                double lambda, double kappa, long n_walks, uint64_t seed,
                                const WosConfig& cfg = {});

}  // namespace qc
