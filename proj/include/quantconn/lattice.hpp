#pragma once

#include <string>
#include <vector>

#include "quantconn/domain.hpp"
#include "quantconn/geometry.hpp"

namespace qc {

struct LatticeCube {
  int id = -1;
  int level = 0;
  int parent = -1;           // -1 at the root level
  int net = -1;              // sample index of the cube center
  double sigma = 0.0;        // summed sample weights
  std::vector<int> children;
};

template <int D>
struct CubeGeometry {
  Vec<D> center;
  double r_inner = 0.0;  // largest r with all samples of Δ(x_Q, r) inside Q
  double ell = 0.0;
  double sigma = 0.0;
  double ball_radius = 0.0;  // r(B_Q) = 4 ℓ(Q)
};

/// Christ-David dyadic cube hierarchy built on weighted boundary samples by
/// nested 2^{-k}-net selection, nearest-net assignment at the finest level,
/// and chained parents.  Each level partitions the samples; nesting and
/// σ-additivity hold exactly by construction.
template <int D>
class Lattice {
 public:
  std::vector<Vec<D>> points;
  std::vector<double> weights;
  double ell0 = 1.0;  // root scale: smallest power of 2 >= sample extent
  int depth = 0;

  std::vector<LatticeCube> cubes;
  std::vector<std::vector<int>> level_cubes;    // cube ids per level 0..depth
  std::vector<std::vector<int>> cube_of;        // [level][sample] -> cube id
  std::vector<std::vector<int>> members_of;     // [cube id] -> sample indices

  double ell(int level) const { return std::ldexp(ell0, -level); }
  double ell_of(int cube) const { return ell(cubes[cube].level); }
  Vec<D> center_of(int cube) const { return points[cubes[cube].net]; }
  int root(int sample = 0) const { return cube_of[0][sample]; }

  const SpatialGrid<D>& grid() const { return grid_; }
  void rebuild_grid();

 private:
  SpatialGrid<D> grid_;
};

template <int D>
Lattice<D> build_lattice(const std::vector<BoundarySample<D>>& samples, int depth);

template <int D>
CubeGeometry<D> cube_geometry(const Lattice<D>& lat, int cube);

enum class Relation { parent, children, descendants_at, dilate };

/// parent/children/descendants_at(j) return cube ids; dilate(λ) returns the
/// sample indices of λQ = {x in E : dist(x, Q) <= (λ-1) ℓ(Q)}.
template <int D>
std::vector<int> relatives(const Lattice<D>& lat, int cube, Relation rel, double arg = 0.0);

/// Per-level summary of the measured grid-lemma constants.
struct LatticeLevelStats {
  int level = 0;
  double a0 = 0.0;      // min over cubes of r_inner / ℓ
  double c1 = 0.0;      // max over cubes of outer radius / ℓ
  int cube_count = 0;
};

template <int D>
std::vector<LatticeLevelStats> lattice_stats(const Lattice<D>& lat);

/// Fraction of Q-samples within ϑ·ℓ(Q) of the complement of Q, maximised over
/// the cubes of each level (thin-boundary property (vi) diagnostic).
template <int D>
double thin_boundary_fraction(const Lattice<D>& lat, int level, double theta);

template <int D>
std::string lattice_to_json(const Lattice<D>& lat);

}  // namespace qc
