#include "cablelab/sim/shapes.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace cablelab::sim {

namespace {

constexpr int kDense = 4000;

std::vector<Vec2> densify(const std::function<Vec2(double)>& curve, double length) {
  std::vector<Vec2> pts(kDense + 1);
  for (int i = 0; i <= kDense; ++i) pts[i] = curve(length * i / kDense);
  return pts;
}

// Places a chain of n-1 equal chords of length c along the polyline `pts`.
// Returns the signed arc mismatch: positive when the curve ran out (the tail
// had to extrapolate along the final tangent), negative when curve is left
// over. Fills `out` when non-null.
double march_chords(const std::vector<Vec2>& pts, double c, int n, Points* out) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();

  if (out) out->resize(2, n);
  Vec2 p = pts.front();
  if (out) out->col(0) = p;
  std::size_t j = 0;
  double u = 0.0;
  double extrapolated = 0.0;

  for (int k = 1; k < n; ++k) {
    bool placed = false;
    while (j + 1 < pts.size()) {
      const Vec2 a = pts[j], b = pts[j + 1];
      if ((b - p).norm() >= c) {
        // Crossing lies in this segment; the distance to p is locally
        // monotone at this resolution, so bisect the fraction.
        double lo = u, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          const Vec2 q = a + mid * (b - a);
          ((q - p).norm() < c ? lo : hi) = mid;
        }
        u = hi;
        p = a + u * (b - a);
        placed = true;
        break;
      }
      ++j;
      u = 0.0;
    }
    if (!placed) {
      // Curve exhausted: the crossing lies beyond the end. Continue along the
      // final tangent and solve |end + t dir - p| = c for the positive root,
      // which varies continuously with the boundary case above.
      const Vec2 dir = (pts.back() - pts[pts.size() - 2]).normalized();
      const Vec2 q = pts.back() - p;
      const double qd = q.dot(dir);
      const double disc = std::max(0.0, qd * qd - q.squaredNorm() + c * c);
      const double t = -qd + std::sqrt(disc);
      p = pts.back() + t * dir;
      extrapolated += t;
      j = pts.size() - 1;
      u = 1.0;
    }
    if (out) out->col(k) = p;
  }
  if (extrapolated > 0.0) return extrapolated;
  const double consumed = cum[j] + u * ((j + 1 < pts.size()) ? (pts[j + 1] - pts[j]).norm() : 0.0);
  return consumed - cum.back();
}

// Resamples a curve of nominal arc length `length` to n points with equal
// consecutive chords summing to `length`. The curve is scaled about its
// centroid until the chord chain exactly spans it, so the returned polyline
// has the requested total length and remains reachable by an inextensible
// discretized cable.
Points resample(const std::function<Vec2(double)>& curve, int n, double length) {
  const std::vector<Vec2> base = densify(curve, length);
  Vec2 centroid = Vec2::Zero();
  for (const Vec2& q : base) centroid += q;
  centroid /= static_cast<double>(base.size());

  const double chord = length / (n - 1);
  const auto scaled = [&](double s) {
    std::vector<Vec2> pts = base;
    for (Vec2& q : pts) q = centroid + s * (q - centroid);
    return pts;
  };

  double lo = 0.7, hi = 1.4;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double miss = march_chords(scaled(mid), chord, n, nullptr);
    (miss > 0.0 ? lo : hi) = mid;  // positive: curve too short, scale up
  }
  Points out;
  march_chords(scaled(0.5 * (lo + hi)), chord, n, &out);
  const Vec2 c = out.rowwise().mean();
  return out.colwise() - c;
}

}  // namespace

double polyline_length(const Points& p) {
  double total = 0.0;
  for (int i = 0; i + 1 < p.cols(); ++i) total += (p.col(i + 1) - p.col(i)).norm();
  return total;
}

Points target_shape(const std::string& kind, int n, double length) {
  if (n < 2) throw std::invalid_argument("target_shape needs n >= 2");
  constexpr double pi = std::numbers::pi;

  if (kind == "line") {
    Points out(2, n);
    for (int k = 0; k < n; ++k) {
      out(0, k) = -0.5 * length + length * k / (n - 1);
      out(1, k) = 0.0;
    }
    return out;
  }
  if (kind == "U") {
    // Lower half circle of radius length/pi, endpoints up.
    const double r = length / pi;
    return resample(
        [&](double s) {
          const double th = pi + pi * s / length;  // pi -> 2 pi
          return Vec2(r * std::cos(th), r * std::sin(th));
        },
        n, length);
  }
  if (kind == "S") {
    // Two opposed half circles of radius length/(2 pi).
    const double r = length / (2.0 * pi);
    return resample(
        [&](double s) {
          if (s <= 0.5 * length) {
            const double th = pi - pi * (s / (0.5 * length));  // upper half, left
            return Vec2(-r + r * std::cos(th), r * std::sin(th));
          }
          const double th = pi + pi * ((s - 0.5 * length) / (0.5 * length));  // lower half, right
          return Vec2(r + r * std::cos(th), r * std::sin(th));
        },
        n, length);
  }
  if (kind == "Z") {
    // Two horizontals joined by a diagonal, 0.3/0.4/0.3 of the arc length.
    const double a = 0.15 * length;
    const double b = 0.5 * std::sqrt(0.07) * length;
    const Vec2 p0(-a, b), p1(a, b), p2(-a, -b), p3(a, -b);
    const double l1 = 2.0 * a, l2 = (p2 - p1).norm();
    return resample(
        [&](double s) -> Vec2 {
          if (s <= l1) return p0 + (s / l1) * (p1 - p0);
          if (s <= l1 + l2) return p1 + ((s - l1) / l2) * (p2 - p1);
          return p2 + ((s - l1 - l2) / l1) * (p3 - p2);
        },
        n, length);
  }
  throw std::invalid_argument("unknown target shape kind: " + kind);
}

Points random_shape(int n, double length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double a1 = amp(rng), a2 = 0.5 * amp(rng);
  const double p1 = phase(rng), p2 = phase(rng);

  // Integrate a smooth random heading profile.
  std::vector<Vec2> pts(kDense + 1);
  pts[0] = Vec2::Zero();
  for (int i = 0; i < kDense; ++i) {
    const double s = static_cast<double>(i) / kDense;
    const double th = a1 * std::sin(2.0 * std::numbers::pi * s + p1) +
                      a2 * std::sin(4.0 * std::numbers::pi * s + p2);
    pts[i + 1] = pts[i] + (length / kDense) * Vec2(std::cos(th), std::sin(th));
  }
  return resample(
      [&](double s) {
        const int i = std::min(kDense, static_cast<int>(s / length * kDense));
        return pts[static_cast<std::size_t>(i)];
      },
      n, length);
}

Scenario make_scenario(const std::string& name, const CableParams& params, double stiffness_scale,
                       std::uint64_t seed) {
  Scenario sc;
  sc.name = name;
  sc.initial = make_cable(params);
  sc.stiffness_scale = stiffness_scale;
  if (name == "random")
    sc.target = random_shape(params.n_keypoints, params.length, seed);
  else
    sc.target = target_shape(name, params.n_keypoints, params.length);

  const double arc = polyline_length(sc.target);
  const double want = polyline_length(sc.initial.keypoints);
  if (std::abs(arc - want) > 0.01 * want)
    throw std::invalid_argument("target arc length " + std::to_string(arc) +
                                " deviates more than 1% from cable length");
  return sc;
}

}  // namespace cablelab::sim
