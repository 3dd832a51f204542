#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quantconn/domain.hpp"
#include "quantconn/flatness.hpp"
#include "quantconn/geometry.hpp"
#include "quantconn/lattice.hpp"
#include "quantconn/whitney.hpp"

namespace qc {

/// Boundary-to-interior polyline: vertices run from y on ∂Ω to x inside.
template <int D>
struct CarrotPath {
  std::vector<Vec<D>> vertices;
  double lambda = 0.0;  // certified constant

  const Vec<D>& y() const { return vertices.front(); }
  const Vec<D>& x() const { return vertices.back(); }
  double length() const {
    double L = 0;
    for (size_t i = 0; i + 1 < vertices.size(); ++i) L += (vertices[i + 1] - vertices[i]).norm();
    return L;
  }
};

/// Ball chain from x (inside the first ball) toward y.
template <int D>
struct HarnackChain {
  std::vector<Vec<D>> centers;
  std::vector<double> radii;
  double C = 0.0;  // certified constant
  Vec<D> x = Vec<D>::Zero();
  Vec<D> y = Vec<D>::Zero();

  size_t size() const { return centers.size(); }
};

template <int D>
struct CarrotVerdict {
  bool ok = false;
  double worst_ratio = 0.0;  // min over checked z of δ(z)/ℓ(γ(y,z))
  Vec<D> worst_point = Vec<D>::Zero();
  bool leaves_domain = false;
};

/// Densified check of λ ℓ(γ(y,z)) <= δ(z); resolution step <= δ/8 away from
/// y and geometric toward y.
template <int D>
CarrotVerdict<D> verify_carrot(const Domain<D>& dom, const std::vector<Vec<D>>& vertices,
                               double lambda);

struct ChainVerdict {
  bool ok = false;
  bool consecutive_ok = false;
  double min_C = kInf;       // smallest constant satisfying the C-conditions
  double depth_C = 0.0;      // condition 2: max of r/dist and dist/r
  double growth_C = 0.0;     // condition 3: max r_j / min_{i<=j} r_i
  int band_count = 0;        // condition 4: max balls per dyadic radius band
  double endpoint_gap = 0.0; // dist(y, last ball)
};

template <int D>
ChainVerdict verify_chain(const Domain<D>& dom, const HarnackChain<D>& chain, double C);

/// Carrot path to good chain via a Vitali subcover of {B(z, δ(z)/10)} and the
/// furthest-reach ordering of the 5-dilates.
template <int D>
HarnackChain<D> path_to_chain(const Domain<D>& dom, const CarrotPath<D>& path);

/// Good chain to carrot path by connecting centers in order; also checks the
/// tail-sum bound Σ_{i>=j} r_i <= 2 C^2 r_j on the input chain.
template <int D>
struct ChainToPathResult {
  CarrotPath<D> path;
  bool tail_bound_ok = false;
  double tail_worst = 0.0;  // max over j of Σ_{i>=j} r_i / (C^2 r_j)
};

template <int D>
ChainToPathResult<D> chain_to_path(const Domain<D>& dom, const HarnackChain<D>& chain);

enum class CarrotFail { none, no_seed, no_target, disconnected, not_found, verify_failed };

template <int D>
struct CarrotSearch {
  std::optional<CarrotPath<D>> path;
  CarrotFail fail = CarrotFail::none;
  bool pruned = false;         // negative results are resolution certificates
  double lambda_achieved = 0;  // worst ratio of the returned path
};

struct CarrotSearchOptions {
  double seed_offset = 0.0;    // 0: auto (4 * min_side)
  double slack = 0.25;         // prune when λ L(I) > slack * 40 * ℓ(I)
};

/// Label-correcting search over the Whitney adjacency graph from the cubes
/// near y (approached from the side of its face normal) toward x.
template <int D>
CarrotSearch<D> find_carrot(const Domain<D>& dom, const WhitneyDecomposition<D>& w,
                            const Vec<D>& y, const Vec<D>& y_normal, const Vec<D>& x,
                            double lambda, const CarrotSearchOptions& opt = {});

/// Largest λ at which find_carrot succeeds, by bisection; reports the best
/// verified ratio of any found path.
template <int D>
double find_lambda_best(const Domain<D>& dom, const WhitneyDecomposition<D>& w, const Vec<D>& y,
                        const Vec<D>& y_normal, const Vec<D>& x, int iterations = 10);

template <int D>
struct JohnPointRecord {
  Vec<D> x;
  double delta = 0.0;     // δ_Ω(x)
  double sigma_window = 0.0;  // σ(Δ_x^N)
  double sigma_F = 0.0;       // reachable mass
  int reachable = 0;
  bool pass = false;
};

template <int D>
struct JohnScanResult {
  std::vector<JohnPointRecord<D>> records;
  double pass_fraction = 0.0;
  // T_Q verdicts for the supplied cubes: pairs (x index, cube id)
  std::vector<std::pair<int, int>> t_q_members;
};

/// For each interior x: F = boundary samples in Δ_x^N = B(x, N δ(x)) ∩ ∂Ω
/// reachable by a verified λ-carrot candidate; x passes iff σ(F) >= θ σ(Δ_x^N)
/// and F is non-empty.  Failures are resolution-relative.
template <int D>
JohnScanResult<D> john_scan(const Domain<D>& dom, const Lattice<D>& lat,
                            const std::vector<BoundarySample<D>>& samples,
                            const WhitneyDecomposition<D>& w, const std::vector<Vec<D>>& xs,
                            double theta, double lambda, double N,
                            const std::vector<int>* t_q_cubes = nullptr,
                            double region_eta = 1.0 / 256, double region_K = 256.0);

template <int D>
struct WsbcResult {
  bool applicable = false;  // bβ(Q) <= C4 ε_flat
  bool wsbc = false;        // no Γ-good chain found at the search resolution
  Vec<D> z1 = Vec<D>::Zero(), z2 = Vec<D>::Zero();
  double bbeta_value = 0.0;
  double best_chain_C = kInf;  // over the tried clearance floors
};

/// Places the big corkscrew pair at ±r(B_Q)/2 from the best plane and runs a
/// chain search through balls inscribed in Whitney cubes.
template <int D>
WsbcResult<D> wsbc_test(const Domain<D>& dom, const Lattice<D>& lat,
                        const WhitneyDecomposition<D>& w, int Q, double Gamma, double eps_flat,
                        double C4 = 4.0, double ball_multiplier = 3.0,
                        const SetDistance<D>& set_distance = nullptr);

/// Two-sided cigar condition min{ℓ(γ(y,z)), ℓ(γ(z,x))} <= M dist(z, ∂Ω).
template <int D>
struct CigarVerdict {
  bool ok = false;
  double worst_M = 0.0;  // smallest M that would pass
};

template <int D>
CigarVerdict<D> cigar_check(const Domain<D>& dom, const std::vector<Vec<D>>& vertices, double M);

/// JSON export of paths and chains.
template <int D>
std::string path_to_json(const CarrotPath<D>& path);
template <int D>
std::string chain_to_json(const HarnackChain<D>& chain);
/// CSV rows (x, δ(x), σ(Δ_x^N), σ(F), verdict).
template <int D>
std::string john_scan_csv(const JohnScanResult<D>& result);

}  // namespace qc
