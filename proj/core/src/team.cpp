#include "formnav/team.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace formnav {

std::vector<Vec2> formation_offsets(FormationKind kind, int n, double scale) {
  if (n < 2) throw std::invalid_argument("formation needs at least 2 robots");
  if (!(scale > 0.0)) throw std::invalid_argument("formation scale must be positive");

  std::vector<Vec2> pts;
  pts.reserve(static_cast<size_t>(n));
  switch (kind) {
    case FormationKind::kCircle: {
      for (int i = 0; i < n; ++i) {
        const double th = 2.0 * std::numbers::pi * i / n;
        pts.push_back({scale * std::cos(th), scale * std::sin(th)});
      }
      break;
    }
    case FormationKind::kWedge: {
      if (n % 2 == 0) throw std::invalid_argument("wedge formation needs odd n");
      pts.push_back({0.0, 0.0});  // apex
      for (int k = 1; k <= (n - 1) / 2; ++k) {
        pts.push_back({-k * scale, k * scale});
        pts.push_back({-k * scale, -k * scale});
      }
      break;
    }
    case FormationKind::kLine: {
      const double mid = 0.5 * (n - 1);
      for (int i = 0; i < n; ++i) pts.push_back({0.0, scale * (i - mid)});
      break;
    }
  }

  Vec2 centroid{0.0, 0.0};
  for (Vec2 p : pts) centroid += p;
  centroid = centroid / static_cast<double>(n);
  for (Vec2& p : pts) p -= centroid;
  return pts;
}

DistanceMatrix desired_distances(std::span<const Vec2> offsets) {
  const int n = static_cast<int>(offsets.size());
  DistanceMatrix d(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dist = norm(offsets[i] - offsets[j]);
      d.at(i, j) = dist;
      d.at(j, i) = dist;
    }
  return d;
}

FormationSpec FormationSpec::make(FormationKind kind, int n, double scale,
                                  double robot_radius) {
  FormationSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.scale = scale;
  spec.offsets = formation_offsets(kind, n, scale);
  spec.desired = desired_distances(spec.offsets);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (spec.desired.at(i, j) <= 2.0 * robot_radius)
        throw std::invalid_argument(
            "formation scale too small: robots " + std::to_string(i) + " and " +
            std::to_string(j) + " would start in contact");
  return spec;
}

bool TeamGraph::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

TeamGraph build_radius_graph(std::span<const Vec2> positions, double radius) {
  TeamGraph g;
  g.n = static_cast<int>(positions.size());
  g.radius = radius;
  g.neighbors.assign(static_cast<size_t>(g.n), {});
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j)
      if (norm(positions[i] - positions[j]) <= radius) {
        g.edges.emplace_back(i, j);
        g.neighbors[static_cast<size_t>(i)].push_back(j);
        g.neighbors[static_cast<size_t>(j)].push_back(i);
      }
  return g;
}

double adaptation_reward(std::span<const Vec2> positions,
                         std::span<const Vec2> velocities,
                         const DistanceMatrix& desired, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [0, 1]");
  const int n = static_cast<int>(positions.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double stretch = std::abs(desired.at(i, j) - norm(positions[i] - positions[j]));
      const double shear = norm(velocities[i] - velocities[j]);
      total += -alpha * stretch - (1.0 - alpha) * shear;
    }
  return total;
}

}  // namespace formnav
