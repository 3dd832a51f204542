#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quantconn/geometry.hpp"

namespace qc {

/// One weighted point of the discretized surface measure.  `normal` points
/// from the boundary into the domain on the face the sample belongs to; for
/// two-sided sheets (slits, planks) the two faces are distinct patches that
/// split the H^n density between them.
template <int D>
struct BoundarySample {
  Vec<D> point;
  double weight = 0.0;
  int patch = 0;
  Vec<D> normal = Vec<D>::Zero();
};

template <int D>
struct NearestBoundary {
  Vec<D> point;
  double dist = 0.0;
  int patch = 0;
};

struct PatchInfo {
  std::string name;
  double measure = 0.0;  // H^n mass of the patch inside the sampling window
};

/// Geometric oracle backing a catalog domain.  All queries are exact
/// (piecewise analytic) for every catalog entry.
template <int D>
class DomainImpl {
 public:
  virtual ~DomainImpl() = default;
  virtual std::string tag() const = 0;
  virtual Box<D> bbox() const = 0;
  virtual double distance(const Vec<D>& x) const = 0;
  virtual bool inside(const Vec<D>& x) const = 0;
  virtual NearestBoundary<D> nearest_boundary(const Vec<D>& x) const = 0;
  /// Exact distance from an axis box to the boundary set.
  virtual double box_distance(const Box<D>& b) const = 0;
  virtual const std::vector<PatchInfo>& patches() const = 0;
  /// Deterministic map from stratum position u in [0,1) (plus extra uniforms
  /// for D=3) to a sample of the given patch.
  virtual BoundarySample<D> sample_patch(int patch, const double* u) const = 0;
  /// H^n(B(center, r) ∩ ∂Ω) in closed form, when available.
  virtual std::optional<double> surface_ball_measure(const Vec<D>& center, double r) const {
    (void)center;
    (void)r;
    return std::nullopt;
  }
};

struct CorkscrewResult {
  bool found = false;
  double clearance = 0.0;  // distance(witness)
};

template <int D>
struct CorkscrewProbe {
  bool found = false;
  Vec<D> witness = Vec<D>::Zero();
  double clearance = 0.0;
};

/// Immutable handle over a catalog domain; cheap to copy, safe to share
/// across workers.
template <int D>
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::shared_ptr<const DomainImpl<D>> impl) : impl_(std::move(impl)) {}

  const DomainImpl<D>& impl() const { return *impl_; }
  std::string tag() const { return impl_->tag(); }
  Box<D> bbox() const { return impl_->bbox(); }
  double diam() const { return impl_->bbox().diam(); }
  /// Membership tolerance used by every boundary test.
  double tol_geom() const { return 1e-9 * diam(); }

  double distance(const Vec<D>& x) const { return impl_->distance(x); }
  bool inside(const Vec<D>& x) const { return impl_->inside(x); }
  bool on_boundary(const Vec<D>& x) const { return impl_->distance(x) <= tol_geom(); }
  NearestBoundary<D> nearest_boundary(const Vec<D>& x) const { return impl_->nearest_boundary(x); }
  double box_distance(const Box<D>& b) const { return impl_->box_distance(b); }
  const std::vector<PatchInfo>& patches() const { return impl_->patches(); }

  explicit operator bool() const { return static_cast<bool>(impl_); }

 private:
  std::shared_ptr<const DomainImpl<D>> impl_;
};

/// Builds a catalog domain from its JSON spec document
/// {"type": ..., "params": {...}, "bbox": [[lo],[hi]]}.  Throws
/// std::invalid_argument for unknown tags or out-of-range parameters.
template <int D>
Domain<D> make_domain(const std::string& json_spec);

/// Convenience: builds from a tag with default parameters.
template <int D>
Domain<D> make_domain_tag(const std::string& tag);

/// Deterministic stratified sampler of the surface measure; weights per patch
/// sum to the patch measure inside the box.
template <int D>
std::vector<BoundarySample<D>> sample_boundary(const Domain<D>& dom, int count, uint64_t seed);

/// Measure estimate with optional Monte Carlo error (zero when analytic).
struct MeasureEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool analytic = true;
};

/// H^n(B(center, r) ∩ ∂Ω) by closed form when the catalog provides one, else
/// by weighted sample counting over `samples` with reported standard error.
template <int D>
MeasureEstimate boundary_measure(const Domain<D>& dom, const Vec<D>& center, double r,
                                 const std::vector<BoundarySample<D>>* samples = nullptr);

/// Grid-plus-refinement search for a corkscrew ball B(w, c*r) inside
/// B(x, r) ∩ Ω.  Sound when it returns true; a false is only a certificate at
/// the configured resolution.
template <int D>
CorkscrewProbe<D> corkscrew_probe(const Domain<D>& dom, const Vec<D>& x, double r, double c,
                                  int grid = 32, int refine_rounds = 3);

/// CSV export with columns x[,y[,z]],weight,patch.
template <int D>
std::string samples_to_csv(const std::vector<BoundarySample<D>>& samples);

}  // namespace qc
