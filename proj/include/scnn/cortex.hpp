#pragma once

// Registered cortical surfaces (unit-sphere vertices with per-vertex scalar
// measures), an exact k-nearest-by-angle index, and resampling onto the
// equiangular grid by plain k-neighbour averaging.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/model.hpp"
#include "scnn/sphere_grid.hpp"

namespace scnn {

enum class Hemisphere : std::uint8_t { left = 0, right = 1 };

struct RegisteredSurface {
  Hemisphere hemisphere = Hemisphere::left;
  std::vector<Vec3> vertices;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> measures;  // one array per channel

  const std::vector<double>& channel(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
      if (channel_names[i] == name) return measures[i];
    throw std::invalid_argument("surface has no channel '" + name + "'");
  }

  void validate() const {
    if (channel_names.size() != measures.size()) throw ValidationError("surface: channel name count does not match measure arrays");
    for (const auto& m : measures)
      if (m.size() != vertices.size())
        throw ValidationError("surface: measure count " + std::to_string(m.size()) + " does not match vertex count " +
                              std::to_string(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (!(std::abs(norm(vertices[i]) - 1.0) <= 1e-6))
        throw ValidationError("surface: vertex " + std::to_string(i) + " is not on the unit sphere");
    for (const auto& m : measures)
      for (double v : m)
        if (!std::isfinite(v)) throw ValidationError("surface: non-finite measure");
  }
};

inline constexpr std::uint32_t surface_version = 1;

// "SRFM", u32 version, u8 hemisphere, u32 vertex count, u32 channel count,
// channel names (u32 length + bytes), vertices as 3 x f64, then one f64
// array per channel.
inline std::string serialize_surface(const RegisteredSurface& s) {
  std::string out = "SRFM";
  detail::put<std::uint32_t>(out, surface_version);
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(s.hemisphere));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.vertices.size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.channel_names.size()));
  for (const auto& n : s.channel_names) detail::put_string(out, n);
  for (const auto& v : s.vertices)
    for (double c : v) detail::put<double>(out, c);
  for (const auto& m : s.measures)
    for (double x : m) detail::put<double>(out, x);
  return out;
}

inline RegisteredSurface parse_surface(const std::string& bytes) {
  detail::Reader r(bytes);
  r.expect_magic("SRFM");
  std::size_t at = r.pos();
  if (auto v = r.get<std::uint32_t>("version"); v != surface_version) throw ParseError("unsupported surface version " + std::to_string(v), at);
  RegisteredSurface s;
  at = r.pos();
  auto h = r.get<std::uint8_t>("hemisphere");
  if (h > 1) throw ParseError("hemisphere byte must be 0 or 1", at);
  s.hemisphere = static_cast<Hemisphere>(h);
  const auto nv = r.get<std::uint32_t>("vertex count");
  const auto nc = r.get<std::uint32_t>("channel count");
  for (std::uint32_t c = 0; c < nc; ++c) s.channel_names.push_back(r.get_string("channel name"));
  at = r.pos();
  if (static_cast<std::size_t>(nv) * 24 > bytes.size() - at) throw ParseError("vertex block shorter than vertex count", at);
  s.vertices.resize(nv);
  for (auto& v : s.vertices)
    for (double& c : v) c = r.get<double>("vertex");
  const std::size_t remaining = bytes.size() - r.pos();
  if (remaining != static_cast<std::size_t>(nc) * nv * 8)
    throw ValidationError("surface: measure block holds " + std::to_string(remaining / 8) + " values, expected " +
                          std::to_string(static_cast<std::size_t>(nc) * nv) + " (channels x vertices)");
  s.measures.assign(nc, std::vector<double>(nv));
  for (auto& m : s.measures)
    for (double& x : m) x = r.get<double>("measure");
  s.validate();
  return s;
}

inline RegisteredSurface load_surface(const std::string& path) { return parse_surface(detail::read_file(path)); }

inline void save_surface(const RegisteredSurface& s, const std::string& path) {
  s.validate();
  detail::write_file(path, serialize_surface(s));
}

// Whitespace-delimited "x y z thickness" lines; '#' starts a comment.
inline RegisteredSurface import_text_surface(const std::string& path, Hemisphere h) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  RegisteredSurface s;
  s.hemisphere = h;
  s.channel_names = {"thickness"};
  s.measures.resize(1);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, z, t;
    if (!(ls >> x >> y >> z >> t)) throw ParseError("expected 'x y z thickness'", line_start);
    std::string extra;
    if (ls >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line_start);
    s.vertices.push_back({x, y, z});
    s.measures[0].push_back(t);
  }
  s.validate();
  return s;
}

// Exact k-nearest-neighbour index under great-circle angle. Ranking key is
// (angle, vertex index), the angle computed as atan2(|p x v|, p . v) exactly
// as in the brute-force scan, so results coincide with it.
class SphereIndex {
public:
  explicit SphereIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }

  struct Hit {
    double angle;
    std::size_t index;
    bool operator<(const Hit& o) const { return angle < o.angle || (angle == o.angle && index < o.index); }
  };

  // k nearest, ordered by (angle, index).
  std::vector<Hit> query(const Vec3& p, std::size_t k) const {
    if (k > points_.size()) throw std::invalid_argument("SphereIndex: k exceeds point count");
    std::priority_queue<Hit> heap;  // worst hit on top
    if (k > 0) search(0, p, k, heap);
    std::vector<Hit> out;
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

private:
  struct Node {
    std::size_t begin, end;
    Vec3 lo, hi;
    int left = -1, right = -1;
  };
  static constexpr std::size_t leaf_size = 16;

  int build(std::size_t begin, std::size_t end) {
    Node n{begin, end, {1e300, 1e300, 1e300}, {-1e300, -1e300, -1e300}};
    for (std::size_t i = begin; i < end; ++i)
      for (int a = 0; a < 3; ++a) {
        n.lo[a] = std::min(n.lo[a], points_[order_[i]][a]);
        n.hi[a] = std::max(n.hi[a], points_[order_[i]][a]);
      }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    if (end - begin > leaf_size) {
      int axis = 0;
      for (int a = 1; a < 3; ++a)
        if (n.hi[a] - n.lo[a] > n.hi[axis] - n.lo[axis]) axis = a;
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t x, std::size_t y) {
                         return points_[x][axis] < points_[y][axis] || (points_[x][axis] == points_[y][axis] && x < y);
                       });
      const int l = build(begin, mid);
      const int r = build(mid, end);
      nodes_[static_cast<std::size_t>(id)].left = l;
      nodes_[static_cast<std::size_t>(id)].right = r;
    }
    return id;
  }

  // Lower bound on the angle from p to any point in the node's box.
  static double angle_bound(const Node& n, const Vec3& p) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = std::max({n.lo[a] - p[a], 0.0, p[a] - n.hi[a]});
      d2 += d * d;
    }
    const double chord = std::sqrt(d2);
    return 2.0 * std::asin(std::min(1.0, chord / 2.0));
  }

  void search(int id, const Vec3& p, std::size_t k, std::priority_queue<Hit>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    constexpr double slack = 1e-9;
    if (heap.size() == k && angle_bound(n, p) > heap.top().angle + slack) return;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t v = order_[i];
        Hit h{angle_between(p, points_[v]), v};
        if (heap.size() < k) {
          heap.push(h);
        } else if (h < heap.top()) {
          heap.pop();
          heap.push(h);
        }
      }
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(n.left)];
    const Node& r = nodes_[static_cast<std::size_t>(n.right)];
    if (angle_bound(l, p) <= angle_bound(r, p)) {
      search(n.left, p, k, heap);
      search(n.right, p, k, heap);
    } else {
      search(n.right, p, k, heap);
      search(n.left, p, k, heap);
    }
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

inline SphereIndex build_spatial_index(const RegisteredSurface& s) { return SphereIndex(s.vertices); }

// Brute-force scan with the same ranking; the test oracle.
inline std::vector<SphereIndex::Hit> brute_force_neighbours(const std::vector<Vec3>& pts, const Vec3& p, std::size_t k) {
  std::vector<SphereIndex::Hit> all;
  all.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({angle_between(p, pts[i]), i});
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

// Each grid value is the mean measure of the k nearest vertices.
inline SphereSignal sample_to_grid(const RegisteredSurface& s, const SphereGrid& grid, std::size_t k = 10,
                                   const std::string& channel = "thickness", int threads = num_threads()) {
  const auto& m = s.channel(channel);
  if (m.empty()) throw std::invalid_argument("sample_to_grid: channel '" + channel + "' is empty");
  if (k == 0 || k > s.vertices.size())
    throw std::invalid_argument("sample_to_grid: k=" + std::to_string(k) + " must lie in [1, vertex count=" +
                                std::to_string(s.vertices.size()) + "]");
  SphereIndex index(s.vertices);
  SphereSignal out(1, grid.bandwidth);
  const int n = grid.size();
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t j) {
        for (int a = 0; a < n; ++a) {
          double sum = 0.0;
          for (const auto& h : index.query(grid.point(static_cast<int>(j), a), k)) sum += m[h.index];
          out.at(0, static_cast<int>(j), a) = sum / static_cast<double>(k);
        }
      },
      threads);
  return out;
}

}  // namespace scnn
