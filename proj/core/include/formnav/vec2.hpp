#pragma once

#include <cmath>

namespace formnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

constexpr double norm_sq(Vec2 v) { return v.x * v.x + v.y * v.y; }

// counterclockwise 90-degree rotation
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

// scales v down to length at most max_len; zero vector is left untouched
inline Vec2 clamp_norm(Vec2 v, double max_len) {
  const double n = norm(v);
  if (n <= max_len || n == 0.0) return v;
  return v * (max_len / n);
}

}  // namespace formnav
