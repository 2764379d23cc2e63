#include "formnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "formnav/team.hpp"

namespace formnav {

const char* to_string(FormationKind kind) {
  switch (kind) {
    case FormationKind::kCircle: return "circle";
    case FormationKind::kWedge: return "wedge";
    case FormationKind::kLine: return "line";
  }
  return "?";
}

FormationKind formation_kind_from_string(const std::string& s) {
  if (s == "circle") return FormationKind::kCircle;
  if (s == "wedge") return FormationKind::kWedge;
  if (s == "line") return FormationKind::kLine;
  throw std::invalid_argument("unknown formation kind: " + s);
}

Vec2 closest_point_on_segment(Vec2 p, const Segment2& seg) {
  const Vec2 ab = seg.b - seg.a;
  const double len_sq = norm_sq(ab);
  if (len_sq == 0.0) return seg.a;
  double t = dot(p - seg.a, ab) / len_sq;
  t = std::clamp(t, 0.0, 1.0);
  return seg.a + ab * t;
}

double point_segment_distance(Vec2 p, const Segment2& seg) {
  return norm(p - closest_point_on_segment(p, seg));
}

double nearest_obstacle_distance(Vec2 p, const Scenario& scenario) {
  double d = kObstacleDistanceCap;
  for (const Segment2& w : scenario.walls)
    d = std::min(d, point_segment_distance(p, w));
  return d;
}

CollisionReport check_collisions(std::span<const Vec2> positions, const Scenario& scenario) {
  const std::vector<std::uint8_t> active(positions.size(), 1);
  return check_collisions(positions, active, scenario);
}

CollisionReport check_collisions(std::span<const Vec2> positions,
                                 std::span<const std::uint8_t> active,
                                 const Scenario& scenario) {
  const int n = static_cast<int>(positions.size());
  CollisionReport rep;
  rep.robot.assign(static_cast<size_t>(n), 0);
  const double r = scenario.robot_radius;
  for (int i = 0; i < n; ++i) {
    if (!active[static_cast<size_t>(i)]) continue;
    if (nearest_obstacle_distance(positions[i], scenario) < r)
      rep.robot[static_cast<size_t>(i)] = 1;
    for (int j = i + 1; j < n; ++j) {
      if (!active[static_cast<size_t>(j)]) continue;
      if (norm(positions[i] - positions[j]) < 2.0 * r) {
        rep.robot[static_cast<size_t>(i)] = 1;
        rep.robot[static_cast<size_t>(j)] = 1;
      }
    }
  }
  for (std::uint8_t f : rep.robot) rep.any |= (f != 0);
  return rep;
}

namespace {

// appends segments for a polyline, dropping zero-length pieces and merging
// collinear runs, so degenerate corridors collapse to the minimal wall set
void append_polyline(std::vector<Segment2>& out, std::span<const Vec2> pts) {
  const size_t first = out.size();
  for (size_t k = 0; k + 1 < pts.size(); ++k) {
    Vec2 p = pts[k], q = pts[k + 1];
    if (p == q) continue;
    if (out.size() > first) {
      Segment2& last = out.back();
      const Vec2 u = last.b - last.a;
      const Vec2 v = q - p;
      if (last.b == p && u.x * v.y - u.y * v.x == 0.0 && dot(u, v) > 0.0) {
        last.b = q;
        continue;
      }
    }
    out.push_back({p, q});
  }
}

}  // namespace

Scenario build_corridor(const CorridorParams& params) {
  if (params.n_robots < 2) throw std::invalid_argument("corridor needs at least 2 robots");
  if (!(params.narrow > 2.0 * params.robot_radius))
    throw std::invalid_argument("narrow width must exceed a robot diameter");
  if (!(params.wide >= params.narrow))
    throw std::invalid_argument("wide width must be at least the narrow width");
  if (!(params.taper >= 0.0)) throw std::invalid_argument("taper length must be non-negative");
  if (!(params.length > 2.0 * params.taper))
    throw std::invalid_argument("corridor length must exceed both tapers");
  if (params.max_steps < 1) throw std::invalid_argument("max_steps must be positive");

  const std::vector<Vec2> offsets =
      formation_offsets(params.kind, params.n_robots, params.scale);
  double ext_x = 0.0, ext_y = 0.0;
  for (Vec2 o : offsets) {
    ext_x = std::max(ext_x, std::abs(o.x));
    ext_y = std::max(ext_y, std::abs(o.y));
  }

  if (2.0 * (ext_y + params.robot_radius) >= params.wide)
    throw std::invalid_argument("formation too wide for the corridor entry");

  // wide entry long enough to hold the start formation with clearance
  const double entry = std::max(0.35 * (params.length - 2.0 * params.taper),
                                2.0 * ext_x + 0.4);
  const double narrow_len = params.length - 2.0 * params.taper - entry;
  if (narrow_len < 0.5)
    throw std::invalid_argument("corridor too short for its tapers and entry section");

  const double hw = 0.5 * params.wide;
  const double hn = 0.5 * params.narrow;
  const double s1 = entry;                          // taper-in begins
  const double s2 = entry + params.taper;           // narrow begins
  const double s3 = params.length - params.taper;   // narrow ends
  const double s4 = params.length;                  // taper-out ends, open exit

  Scenario sc;
  const Vec2 top[] = {{0.0, hw}, {s1, hw}, {s2, hn}, {s3, hn}, {s4, hw}};
  Vec2 bottom[std::size(top)];
  for (size_t k = 0; k < std::size(top); ++k) bottom[k] = {top[k].x, -top[k].y};
  append_polyline(sc.walls, top);
  append_polyline(sc.walls, bottom);

  sc.axis = {1.0, 0.0};
  sc.width_wide = params.wide;
  sc.width_narrow = params.narrow;
  sc.narrow_span = {s2, s3};
  sc.robot_radius = params.robot_radius;
  sc.n_robots = params.n_robots;
  sc.formation = params.kind;
  sc.formation_scale = params.scale;
  sc.max_steps = params.max_steps;

  sc.start_centroid = {0.5 * entry, 0.0};
  sc.goal_centroid = {params.length + ext_x + 1.0, 0.0};
  sc.starts.reserve(offsets.size());
  sc.goals.reserve(offsets.size());
  for (Vec2 o : offsets) {
    sc.starts.push_back(sc.start_centroid + o);
    sc.goals.push_back(sc.goal_centroid + o);
  }
  return sc;
}

std::optional<CorridorParams> corridor_params_from(const Scenario& scenario) {
  if (scenario.walls.empty()) return std::nullopt;
  double length = 0.0;
  for (const Segment2& w : scenario.walls) {
    length = std::max(length, dot(w.a, scenario.axis));
    length = std::max(length, dot(w.b, scenario.axis));
  }
  CorridorParams p;
  p.n_robots = scenario.n_robots;
  p.kind = scenario.formation;
  p.scale = scenario.formation_scale;
  p.wide = scenario.width_wide;
  p.narrow = scenario.width_narrow;
  p.length = length;
  p.taper = length - scenario.narrow_span[1];
  p.robot_radius = scenario.robot_radius;
  p.max_steps = scenario.max_steps;
  if (!(p.taper >= 0.0) || !(scenario.narrow_span[0] > p.taper)) return std::nullopt;
  try {
    const Scenario rebuilt = build_corridor(p);
    if (rebuilt.walls.size() != scenario.walls.size()) return std::nullopt;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  return p;
}

double local_width_at(const Scenario& scenario, double s) {
  const Vec2 axis = scenario.axis;
  const Vec2 lat = perp(axis);
  double above = std::numeric_limits<double>::infinity();
  double below = -std::numeric_limits<double>::infinity();
  for (const Segment2& w : scenario.walls) {
    const double sa = dot(w.a, axis), sb = dot(w.b, axis);
    const double wa = dot(w.a, lat), wb = dot(w.b, lat);
    if (s < std::min(sa, sb) || s > std::max(sa, sb)) continue;
    double lo, hi;
    if (sa == sb) {  // wall step perpendicular to the axis
      lo = std::min(wa, wb);
      hi = std::max(wa, wb);
    } else {
      const double t = (s - sa) / (sb - sa);
      lo = hi = wa + t * (wb - wa);
    }
    if (lo > 0.0) above = std::min(above, lo);
    if (hi < 0.0) below = std::max(below, hi);
  }
  if (!std::isfinite(above) || !std::isfinite(below)) return scenario.width_wide;
  return above - below;
}

}  // namespace formnav
