#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "quantconn/domain.hpp"
#include "quantconn/geometry.hpp"
#include "quantconn/lattice.hpp"

namespace qc {

template <int D>
struct WhitneyCube {
  Vec<D> corner;
  double side = 0.0;
  int level = 0;          // dyadic level below the root cube
  double dist = 0.0;      // exact dist(I, ∂Ω)
  std::vector<int> neighbors;  // cubes sharing a boundary point

  Box<D> box() const { return {corner, corner + Vec<D>::Constant(side)}; }
  Vec<D> center() const { return corner + Vec<D>::Constant(side / 2); }
  double diam() const { return side * std::sqrt(static_cast<double>(D)); }
};

/// Whitney decomposition of the complement of the boundary inside a power-of-
/// two root cube: the maximal dyadic cubes I with 4 diam(I) <= dist(4I, ∂Ω).
/// Every emitted cube then satisfies 4 diam(I) <= dist(4I,E) <= dist(I,E)
/// <= 40 diam(I) (the maximality of I forces dist(I,E) < 16 diam(I)).
template <int D>
class WhitneyDecomposition {
 public:
  std::vector<WhitneyCube<D>> cubes;
  Vec<D> root_corner = Vec<D>::Zero();
  double root_side = 1.0;
  double min_side = 0.0;
  double tau0 = 1.0 / 32.0;
  double uncovered_volume = 0.0;  // collar dropped at the resolution floor

  double side_at(int level) const { return std::ldexp(root_side, -level); }
  int levels() const { return static_cast<int>(level_index_.size()); }

  /// Cube whose half-open box contains x, or -1.
  int locate(const Vec<D>& x) const;

  /// Cubes I with I*(τ) ∋ x for τ in (0, τ0]; bounded count.
  std::vector<int> fattened_containers(const Vec<D>& x, double tau) const;

  void build_index();

 private:
  uint64_t key(int level, const Vec<D>& corner) const;
  std::vector<std::unordered_map<uint64_t, int>> level_index_;
};

template <int D>
WhitneyDecomposition<D> decompose(const Domain<D>& dom, const Box<D>& box, double min_side);

template <int D>
WhitneyDecomposition<D> decompose(const Domain<D>& dom, double min_side);

/// Concentric dilation I*(τ) = (1+τ) I; requires 0 < τ <= τ0.
template <int D>
Box<D> fatten(const WhitneyDecomposition<D>& w, int cube, double tau);

/// The Whitney collection W^0_Q of cubes with
///   η^{1/4} ℓ(Q) <= ℓ(I) <= K^{1/2} ℓ(Q) and dist(I, Q) <= K^{1/2} ℓ(Q),
/// and the open region U_Q as the union of their fattened interiors.
template <int D>
struct WhitneyRegion {
  std::vector<int> cube_ids;
  double tau = 0.0;
  double eta = 0.0, K = 0.0;

  bool empty() const { return cube_ids.empty(); }
};

template <int D>
WhitneyRegion<D> whitney_region(const WhitneyDecomposition<D>& w, const Lattice<D>& lat, int Q,
                                double eta, double K, double tau);

template <int D>
bool region_contains(const WhitneyDecomposition<D>& w, const WhitneyRegion<D>& region,
                     const Vec<D>& x);

/// CSV export: corner coords, side, dist, neighbor count.
template <int D>
std::string whitney_to_csv(const WhitneyDecomposition<D>& w);

/// Adjacency as an edge list (i,j with i < j).
template <int D>
std::string whitney_edges_csv(const WhitneyDecomposition<D>& w);

}  // namespace qc
