#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "quantconn/domain.hpp"
#include "quantconn/geometry.hpp"
#include "quantconn/lattice.hpp"

namespace qc {

/// Bilateral flatness of the sample cloud inside a ball: the searched minimum
/// over affine planes of
///   (1/r) ( sup_{y in E∩B} dist(y, L) + sup_{y in L∩B} dist(y, E) ).
/// The value is a certified upper bound on the true infimum; `resolution`
/// bounds how far below it the infimum can sit given the final grid step.
template <int D>
struct FlatnessRecord {
  double bbeta = 0.0;
  double resolution = 0.0;
  Vec<D> normal = Vec<D>::Zero();
  double offset = 0.0;
  Vec<D> ball_center = Vec<D>::Zero();
  double ball_radius = 0.0;
};

struct BbetaOptions {
  int angle_grid = 32;
  int offset_grid = 16;
  int refine_rounds = 2;
  int chord_points = 33;
  // When >= 0, stop as soon as any candidate plane scores at or below this
  // threshold: an upper bound at most ε already decides bβ <= ε.
  double early_accept = -1.0;
};

/// Exact distance to the underlying boundary set, when the caller has one;
/// the plane-to-set supremum falls back to nearest-sample distances without
/// it (window-edge effects then inflate bβ near the sampled rim).
template <int D>
using SetDistance = std::function<double(const Vec<D>&)>;

template <int D>
FlatnessRecord<D> bbeta(const std::vector<Vec<D>>& pts, const SpatialGrid<D>& grid,
                        const Vec<D>& center, double radius, const BbetaOptions& opt = {},
                        const SetDistance<D>& set_distance = nullptr);

template <int D>
FlatnessRecord<D> bbeta(const std::vector<BoundarySample<D>>& samples, const Vec<D>& center,
                        double radius, const BbetaOptions& opt = {},
                        const SetDistance<D>& set_distance = nullptr);

/// bβ(Q) over the dilated cube ball: bβ( m * B_Q ) with r(B_Q) = 4 ℓ(Q).
template <int D>
FlatnessRecord<D> bbeta_cube(const Lattice<D>& lat, int cube, double ball_multiplier = 3.0,
                             const BbetaOptions& opt = {},
                             const SetDistance<D>& set_distance = nullptr);

/// Evaluates bβ for every cube strictly below R down to max_depth levels and
/// accumulates the packing ratios Σ_{Q: bβ>ε} σ(Q) / σ(R) per depth.
struct PackingProfile {
  std::vector<double> ratio_at_depth;       // cumulative over levels 1..d below R
  std::map<int, double> bbeta_of;           // per cube id
  double eps = 0.0;
  double ball_multiplier = 3.0;
};

template <int D>
PackingProfile ur_packing(const Lattice<D>& lat, int R, double eps, double ball_multiplier = 3.0,
                          int max_depth = -1, const BbetaOptions& opt = {},
                          const SetDistance<D>& set_distance = nullptr);

/// Stopping-time corona decomposition: Stop(R) is the maximal family of
/// Q in D(R)\{R} with Q not good or bβ(parent Q) > ε; Top recurses through
/// Stop(R)∩G to the lattice floor.
struct CoronaDecomposition {
  std::vector<int> top;                                // tree roots
  std::map<int, std::vector<int>> stop;                // per root
  std::map<int, std::vector<int>> tree;                // per root, includes R
  std::map<int, double> bbeta_of;                      // per evaluated cube
  std::map<int, std::string> stopped_reason;           // "flat-break" | "not-good"
  double eps = 0.0;
  double packing_sum = 0.0;    // Σ_{R in Top} σ(R)
  double packing_ratio = 0.0;  // over σ(R0)
};

template <int D>
CoronaDecomposition build_corona(const Lattice<D>& lat, int R0, double eps,
                                 const std::vector<char>* good = nullptr,
                                 double ball_multiplier = 3.0, const BbetaOptions& opt = {},
                                 const SetDistance<D>& set_distance = nullptr);

/// Cubes that stop a corona tree without spawning a new one, plus the tree
/// roots: the maximal/bad family fed to the discrete Carleson measure.
std::vector<int> corona_bad_family(const CoronaDecomposition& corona);

/// Discrete Carleson measure: α_Q = σ(Q) iff D_*(Q) (Q, children,
/// grandchildren) meets the bad family; m(D(R)) = Σ_{Q ⊆ R} α_Q.
struct PackingMeasure {
  std::vector<double> alpha;       // per cube id
  double m_total = 0.0;            // m(D(R))
  double carleson_norm = 0.0;      // sup_{Q ⊆ R} m(D(Q))/σ(Q)
};

template <int D>
PackingMeasure packing_measure(const Lattice<D>& lat, int R, const std::vector<int>& bad_family);

/// Extraction lemma: F = maximal cubes Q' ⊊ Q with m(D(Q')) >= b σ(Q');
/// F_bad = those with m(D(Q')\{Q'}) > a σ(Q').  Certifies the restricted
/// Carleson norm and the bad-mass bound as computed sums.
struct CarlesonExtract {
  std::vector<int> F, F_bad;
  double norm_mF = 0.0;      // ‖m_F‖_{C(Q)}
  double achieved_C = 0.0;   // norm_mF / b
  double bad_sigma = 0.0;    // σ(∪ F_bad)
  double bad_bound = 0.0;    // (a+b)/(a+2b) σ(Q)
  bool bad_ok = false;
};

template <int D>
CarlesonExtract carleson_extract(const Lattice<D>& lat, int Q, const std::vector<double>& alpha,
                                 double a, double b);

/// d_R regularization of a semi-coherent tree: the 1-Lipschitz gauge
/// d_R(x) = inf_{Q in T} ( ℓ(Q) + dist(x,Q) ) sampled on boundary points, and
/// the maximal-cube family End(R) with per-cube certificates.
struct EndFamily {
  std::vector<int> cubes;          // End(R), pairwise disjoint
  std::vector<char> clamped;       // per End cube: hit the lattice floor
  std::vector<double> d_R;         // per sample
  bool cert_a_ok = true;           // 100 ℓ(P) <= d_R <= 900 ℓ(P) on 50 B_P
  double cert_a_lo = kInf, cert_a_hi = 0.0;  // measured extremes of d_R/ℓ(P)
  double cert_b_ratio = 1.0;       // max side ratio of overlapping pairs
  int cert_c_overlap = 0;          // max count of 50B_P overlaps
  bool cert_d_ok = true;           // containment P ⊂ 22Q, ℓ(Q) <= 2000 ℓ(P)
};

template <int D>
EndFamily regularize_end(const Lattice<D>& lat, int R, const std::vector<int>& tree);

/// JSON forest export with per-cube {bbeta, alpha, stopped_reason}.
template <int D>
std::string corona_to_json(const Lattice<D>& lat, const CoronaDecomposition& corona,
                           const PackingMeasure* pm = nullptr);

/// CSV rows (depth, ratio) of a packing profile.
std::string packing_to_csv(const PackingProfile& profile);

}  // namespace qc
