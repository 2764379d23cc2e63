#pragma once

#include <span>
#include <utility>
#include <vector>

#include "formnav/vec2.hpp"
#include "formnav/world.hpp"

namespace formnav {

// dense symmetric matrix of desired inter-robot distances
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(int n) : n_(n), v_(static_cast<size_t>(n) * n, 0.0) {}

  int size() const { return n_; }
  double& at(int i, int j) { return v_[static_cast<size_t>(i) * n_ + j]; }
  double at(int i, int j) const { return v_[static_cast<size_t>(i) * n_ + j]; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

// canonical formation shapes, centered so the offsets' centroid is the
// origin. throws std::invalid_argument for n < 2, scale <= 0, or an even-n
// wedge (the wedge keeps one robot on the apex).
std::vector<Vec2> formation_offsets(FormationKind kind, int n, double scale);

DistanceMatrix desired_distances(std::span<const Vec2> offsets);

struct FormationSpec {
  FormationKind kind = FormationKind::kCircle;
  int n = 0;
  double scale = 1.0;
  std::vector<Vec2> offsets;
  DistanceMatrix desired;

  // validates that the template keeps robots apart: every desired distance
  // must exceed 2*robot_radius.
  static FormationSpec make(FormationKind kind, int n, double scale,
                            double robot_radius = kRobotRadius);
};

// undirected graph over robots: edge iff distance <= radius (inclusive)
struct TeamGraph {
  int n = 0;
  double radius = 0.0;
  std::vector<std::pair<int, int>> edges;        // i < j, lexicographic
  std::vector<std::vector<int>> neighbors;       // ascending per node

  bool has_edge(int i, int j) const;
};

TeamGraph build_radius_graph(std::span<const Vec2> positions, double radius);

// spring-damper formation shaping term, summed over all unordered pairs:
//   -alpha * |d_ij - |p_i - p_j|| - (1 - alpha) * |q_i - q_j|
// alpha outside [0, 1] throws.
double adaptation_reward(std::span<const Vec2> positions,
                         std::span<const Vec2> velocities,
                         const DistanceMatrix& desired, double alpha);

}  // namespace formnav
