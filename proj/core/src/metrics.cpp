#include "formnav/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace formnav {

double success_rate(std::span<const Vec2> final_positions, std::span<const Vec2> goals,
                    double goal_tol, bool any_collision) {
  if (final_positions.size() != goals.size())
    throw std::invalid_argument("success_rate: size mismatch");
  if (any_collision) return 0.0;
  int reached = 0;
  for (size_t i = 0; i < goals.size(); ++i)
    if (norm(final_positions[i] - goals[i]) <= goal_tol) ++reached;
  return 100.0 * reached / static_cast<double>(goals.size());
}

double formation_width(std::span<const Vec2> positions, Vec2 axis, double robot_width) {
  if (positions.empty()) throw std::invalid_argument("formation_width: no robots");
  const Vec2 lat = perp(axis);
  double lo = dot(positions[0], lat), hi = lo;
  for (Vec2 p : positions) {
    const double w = dot(p, lat);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  return (hi - lo) + robot_width;
}

double shape_integrity(std::span<const Vec2> positions, const DistanceMatrix& desired) {
  const int n = static_cast<int>(positions.size());
  double err_sum = 0.0, des_sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      err_sum += std::abs(norm(positions[static_cast<size_t>(i)] -
                               positions[static_cast<size_t>(j)]) -
                          desired.at(i, j));
      des_sum += desired.at(i, j);
      ++pairs;
    }
  if (pairs == 0 || des_sum == 0.0) return 1.0;
  return std::max(0.0, 1.0 - (err_sum / pairs) / (des_sum / pairs));
}

double cfi(double width, const CfiConfig& cfg, double epsilon) {
  const double miss = std::min(std::abs(width - (cfg.tau + cfg.delta)),
                               std::abs(width - (cfg.tau - cfg.delta)));
  double term1 = cfg.beta * (1.0 - miss / cfg.delta);
  term1 = std::clamp(term1, 0.0, cfg.beta);
  return term1 + (1.0 - cfg.beta) * epsilon;
}

std::map<double, double> episode_cfi(const Trajectory& traj, const Scenario& scenario,
                                     const FormationSpec& formation,
                                     std::span<const CfiConfig> configs,
                                     bool* used_full_episode) {
  if (traj.steps.empty()) throw std::invalid_argument("episode_cfi: empty trajectory");

  // pass 1: which steps sit inside the narrow span?
  std::vector<size_t> window;
  for (size_t s = 0; s < traj.steps.size(); ++s) {
    Vec2 centroid{};
    for (const auto& r : traj.steps[s].robots) centroid += r.p;
    centroid = centroid / static_cast<double>(traj.steps[s].robots.size());
    const double station = dot(centroid, scenario.axis);
    if (station >= scenario.narrow_span[0] && station <= scenario.narrow_span[1])
      window.push_back(s);
  }
  const bool full = window.empty();
  if (used_full_episode) *used_full_episode = full;
  if (full) {
    window.resize(traj.steps.size());
    for (size_t s = 0; s < window.size(); ++s) window[s] = s;
  }

  std::map<double, double> out;
  for (const CfiConfig& base : configs) out[base.delta] = 0.0;
  for (size_t s : window) {
    const std::vector<Vec2> pos = traj.positions_at(s);
    Vec2 centroid{};
    for (Vec2 p : pos) centroid += p;
    centroid = centroid / static_cast<double>(pos.size());
    const double station = dot(centroid, scenario.axis);
    const double local = local_width_at(scenario, station);
    const double eps = shape_integrity(pos, formation.desired);
    for (const CfiConfig& base : configs) {
      CfiConfig cfg = base;
      cfg.tau = local - 2.0 * cfg.robot_width;
      const double w = formation_width(pos, scenario.axis, cfg.robot_width);
      out[base.delta] += cfi(w, cfg, eps);
    }
  }
  for (auto& [delta, v] : out) v /= static_cast<double>(window.size());
  return out;
}

double oscillation_index(const Trajectory& traj, double dt) {
  if (traj.steps.size() < 2) throw std::invalid_argument("oscillation_index: need >= 2 steps");
  double acc = 0.0;
  size_t count = 0;
  for (size_t s = 1; s < traj.steps.size(); ++s) {
    const auto& cur = traj.steps[s].robots;
    const auto& prev = traj.steps[s - 1].robots;
    for (size_t i = 0; i < cur.size(); ++i) {
      acc += norm(cur[i].q - prev[i].q) / dt;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

std::vector<CfiConfig> default_cfi_configs(double robot_width) {
  std::vector<CfiConfig> configs;
  for (double d : kCfiDeltas) {
    CfiConfig c;
    c.delta = d;
    c.robot_width = robot_width;
    configs.push_back(c);
  }
  return configs;
}

EpisodeMetrics episode_metrics(const Trajectory& traj, const Scenario& scenario,
                               const FormationSpec& formation, double goal_tol) {
  EpisodeMetrics m;
  m.steps = static_cast<int>(traj.steps.size()) - 1;
  const std::vector<Vec2> final_pos = traj.positions_at(traj.steps.size() - 1);
  m.sr = success_rate(final_pos, scenario.goals, goal_tol, traj.any_collision());
  const auto configs = default_cfi_configs(2.0 * scenario.robot_radius);
  m.cfi_by_delta = episode_cfi(traj, scenario, formation, configs, &m.cfi_used_full_episode);
  m.oscillation = traj.steps.size() >= 2 ? oscillation_index(traj, traj.dt) : 0.0;
  return m;
}

}  // namespace formnav
