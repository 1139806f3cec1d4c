#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <cstdint>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace teer {

namespace detail {

struct HullFace {
  std::array<std::size_t, 3> v;
  Eigen::Vector3d normal;
  double offset;  // normal . x = offset on the plane
  bool alive = true;

  double distance(const Eigen::Vector3d& p) const { return normal.dot(p) - offset; }
};

// Face a-b-c, counter-clockwise seen from outside.
inline HullFace make_face(std::span<const Eigen::Vector3d> pts, std::size_t a, std::size_t b, std::size_t c) {
  HullFace f{{a, b, c}, (pts[b] - pts[a]).cross(pts[c] - pts[a]), 0.0};
  const double n = f.normal.norm();
  if (n > 0) f.normal /= n;
  f.offset = f.normal.dot(pts[a]);
  return f;
}

inline std::uint64_t edge_key(std::size_t a, std::size_t b) {
  return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b);
}

// True if the directed edges form exactly one closed loop.
inline bool single_loop(const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (edges.size() < 3) return false;
  std::unordered_map<std::size_t, std::size_t> next;
  for (auto [a, b] : edges) {
    if (!next.emplace(a, b).second) return false;
  }
  const std::size_t start = edges.front().first;
  std::size_t v = start, steps = 0;
  do {
    const auto it = next.find(v);
    if (it == next.end()) return false;
    v = it->second;
    ++steps;
  } while (v != start && steps <= edges.size());
  return v == start && steps == edges.size();
}

}  // namespace detail

// Volume of the convex hull of a point set (incremental construction; the visible region
// is grown from the most visible face so the horizon stays a single loop). Degenerate sets
// (fewer than four affinely independent points) have zero volume.
inline double convex_hull_volume(std::span<const Eigen::Vector3d> input) {
  using detail::HullFace;
  // Paths dwell a lot; duplicates add nothing but degeneracy.
  std::vector<Eigen::Vector3d> uniq(input.begin(), input.end());
  auto lex = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  };
  std::sort(uniq.begin(), uniq.end(), lex);
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const std::span<const Eigen::Vector3d> pts(uniq);
  const std::size_t n = pts.size();
  if (n < 4) return 0.0;

  Eigen::Vector3d lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double scale = std::max((hi - lo).norm(), 1e-300);
  const double eps = 1e-9 * scale;

  // Far points first: the hull grows in big steps and the near-coplanar leftovers mostly
  // fall inside without being processed.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : uniq) centroid += p;
  centroid /= static_cast<double>(n);
  std::stable_sort(uniq.begin(), uniq.end(), [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return (a - centroid).squaredNorm() > (b - centroid).squaredNorm();
  });

  // Initial tetrahedron from extreme points.
  std::size_t i0 = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (pts[i].x() < pts[i0].x()) i0 = i;
  std::size_t i1 = i0;
  double best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (best <= eps) return 0.0;
  const Eigen::Vector3d dir = (pts[i1] - pts[i0]).normalized();
  std::size_t i2 = i0;
  best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).cross(dir).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best <= eps) return 0.0;
  const Eigen::Vector3d nrm = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  std::size_t i3 = i0;
  best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs((pts[i] - pts[i0]).dot(nrm));
    if (d > best) best = d, i3 = i;
  }
  if (best <= eps) return 0.0;
  // Orient the base triangle so the fourth point is behind it.
  if ((pts[i3] - pts[i0]).dot(nrm) > 0) std::swap(i1, i2);

  std::vector<HullFace> faces;
  std::unordered_map<std::uint64_t, std::size_t> by_edge;  // directed edge -> face holding it
  auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    faces.push_back(detail::make_face(pts, a, b, c));
    const std::size_t f = faces.size() - 1;
    by_edge[detail::edge_key(a, b)] = f;
    by_edge[detail::edge_key(b, c)] = f;
    by_edge[detail::edge_key(c, a)] = f;
  };
  add_face(i0, i1, i2);
  add_face(i0, i3, i1);
  add_face(i1, i3, i2);
  add_face(i2, i3, i0);

  std::vector<std::size_t> visible, stack;
  std::vector<char> mark;
  for (std::size_t p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    std::size_t seed = faces.size();
    double far = eps;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      const double d = faces[f].distance(pts[p]);
      if (d > far) far = d, seed = f;
    }
    if (seed == faces.size()) continue;

    mark.assign(faces.size(), 0);
    visible.clear();
    stack.assign(1, seed);
    mark[seed] = 1;
    while (!stack.empty()) {
      const std::size_t f = stack.back();
      stack.pop_back();
      visible.push_back(f);
      for (int e = 0; e < 3; ++e) {
        const auto& v = faces[f].v;
        const std::size_t g = by_edge.at(detail::edge_key(v[(e + 1) % 3], v[e]));
        if (!mark[g] && faces[g].distance(pts[p]) > eps) {
          mark[g] = 1;
          stack.push_back(g);
        }
      }
    }

    std::vector<std::pair<std::size_t, std::size_t>> horizon;
    for (std::size_t f : visible) {
      const auto v = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = v[e], b = v[(e + 1) % 3];
        if (!mark[by_edge.at(detail::edge_key(b, a))]) horizon.emplace_back(a, b);
      }
    }
    // A point that sees a ring of faces around an unseen one sits within rounding of the
    // hull; adding it would pinch the surface, and skipping it costs no measurable volume.
    if (!detail::single_loop(horizon)) continue;
    for (std::size_t f : visible) {
      faces[f].alive = false;
      const auto& v = faces[f].v;
      for (int e = 0; e < 3; ++e) by_edge.erase(detail::edge_key(v[e], v[(e + 1) % 3]));
    }
    for (auto [a, b] : horizon) add_face(a, b, p);
  }

  const Eigen::Vector3d origin = pts[i0];
  double volume = 0.0;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    const Eigen::Vector3d a = pts[f.v[0]] - origin, b = pts[f.v[1]] - origin, c = pts[f.v[2]] - origin;
    volume += a.dot(b.cross(c)) / 6.0;
  }
  return std::max(volume, 0.0);
}

}  // namespace teer
