#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mict/field.hpp"
#include "mict/mesh.hpp"

namespace mict {

// Bounding-volume tree over the triangles of a mesh for exact
// point-to-surface distance queries.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(const TriangleMesh& mesh, int leaf_size = 4);

  // Minimum distance (mm) from p to any triangle.
  double distance(const Vec3& p) const;
  const TriangleMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Vec3 lower, upper;
    std::uint32_t first = 0;  // first item (leaf) or left child (inner)
    std::uint32_t count = 0;  // items in a leaf; 0 for inner nodes
    std::uint32_t right = 0;  // right child (inner)
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids, int leaf_size);

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> items_;
};

// Area-weighted mean over the triangles of S of the distance from each
// triangle centroid to the surface Sigma. Throws EmptySurface.
double surface_alpha(const TriangleMesh& s, const TriangleMesh& sigma);
// Same with a prebuilt index on Sigma.
double surface_alpha(const TriangleMesh& s, const SurfaceIndex& sigma);

// |S n Sigma| / |S| by voxel counts. Throws ShapeMismatch, or EmptySurface
// when S is empty.
double target_overlap(const LabelMask& s, const LabelMask& sigma);

struct Histogram {
  double bin_width = 0.5;             // mm
  std::vector<double> area_fraction;  // area share of each distance bin
};

struct ClassificationThresholds {
  double phi_under = 0.6;  // phi_S below this is an underestimate
  double alpha_over = 3.0; // mm; alpha above this is large
  double phi_over = 0.9;   // phi_S at or above this counts as ~1
};

// "underestimation", "overestimation", "mixed" or "adequate".
std::string classify(double alpha, double phi_s, const ClassificationThresholds& t = {});

struct ValidationOptions {
  int restarts = 3;
  unsigned seed = 12345;
  double max_rotation_deg = 30.0;
  int max_iterations = 1500;  // per simplex run
  double initial_rotation_step_deg = 5.0;
  double initial_translation_step = 2.0;  // mm
  // The simplex search scores a strided subset of at most this many S
  // triangles; the reported alpha always uses all of them.
  std::size_t search_triangles = 800;
  ClassificationThresholds thresholds;
};

struct ValidationReport {
  double alpha = 0.0;         // mm, after rigid minimization
  double alpha_before = 0.0;  // mm, identity transform
  double phi_s = 0.0;         // unregistered (headline)
  std::optional<double> phi_s_registered;
  RigidTransform best_transform;  // applied to S
  int iterations = 0;
  bool optimizer_ok = true;
  Histogram histogram;  // distances of S after registration
  std::string classification;
};

// Minimizes alpha over rigid motions of S, rotating about the centroid of
// dS. The identity is always a candidate, so alpha <= alpha_before.
// phi_S needs the masks; pass nullptr to skip it. The classification uses
// alpha_before with the unregistered phi_S.
ValidationReport minimize_alpha(const TriangleMesh& s_surface, const TriangleMesh& sigma_surface,
                                const LabelMask* s_mask, const LabelMask* sigma_mask,
                                const ValidationOptions& options = {});

std::string report_json(const ValidationReport& r);
// Row in the style "alpha 2.46 mm  phi_S 0.701", 3 significant figures.
std::string report_text(const ValidationReport& r);
std::string three_sig(double v);

}  // namespace mict
