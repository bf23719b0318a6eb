#include "busroute/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

namespace busroute::geometry {

namespace {

double dist2(XY a, XY b) {
  double const dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Keeps the part of `c` where n.p <= d; the new edge is tagged `site`.
void clip(Cell& c, XY n, double d, int site, double eps) {
  auto const m = c.vertices.size();
  Cell out;
  out.vertices.reserve(m + 1);
  out.edge_site.reserve(m + 1);
  for (std::size_t k = 0; k < m; ++k) {
    XY const a = c.vertices[k];
    XY const b = c.vertices[(k + 1) % m];
    double const fa = n.x * a.x + n.y * a.y - d;
    double const fb = n.x * b.x + n.y * b.y - d;
    bool const ina = fa <= 0, inb = fb <= 0;
    auto const cut = [&] {
      double const t = fa / (fa - fb);
      return XY{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    };
    if (ina) {
      out.vertices.push_back(a);
      out.edge_site.push_back(c.edge_site[k]);
      if (!inb) {
        out.vertices.push_back(cut());
        out.edge_site.push_back(site);
      }
    } else if (inb) {
      out.vertices.push_back(cut());
      out.edge_site.push_back(c.edge_site[k]);
    }
  }
  // Drop zero-length edges left by cuts through vertices.
  Cell clean;
  auto const k = out.vertices.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (dist2(out.vertices[i], out.vertices[(i + 1) % k]) <= eps * eps && k > 3) {
      continue;
    }
    clean.vertices.push_back(out.vertices[i]);
    clean.edge_site.push_back(out.edge_site[i]);
  }
  c = std::move(clean);
}

}  // namespace

Box bounding_box(std::span<XY const> pts, double fraction, double min_margin) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (auto const& p : pts) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  double const mx = std::max(b.width() * fraction, min_margin);
  double const my = std::max(b.height() * fraction, min_margin);
  return {b.min_x - mx, b.min_y - my, b.max_x + mx, b.max_y + my};
}

double signed_area(Ring const& r) {
  double a = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto const& p = r[i];
    auto const& q = r[(i + 1) % r.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a / 2.0;
}

std::vector<Cell> voronoi_cells(std::span<XY const> sites, Box const& box) {
  auto const n = sites.size();
  std::vector<Cell> cells(n);
  if (n == 0) return cells;
  double const extent = std::max(box.width(), box.height());
  double const eps = extent * 1e-12;

  // Bucket grid with about two sites per bucket.
  double const cs = std::max(std::sqrt(box.width() * box.height() / static_cast<double>(n)) * 1.5,
                             extent * 1e-6);
  auto const gx = static_cast<std::int64_t>(std::ceil(box.width() / cs)) + 1;
  auto const gy = static_cast<std::int64_t>(std::ceil(box.height() / cs)) + 1;
  auto const bucket_of = [&](XY p) {
    auto const ix = std::clamp<std::int64_t>(
        static_cast<std::int64_t>((p.x - box.min_x) / cs), 0, gx - 1);
    auto const iy = std::clamp<std::int64_t>(
        static_cast<std::int64_t>((p.y - box.min_y) / cs), 0, gy - 1);
    return std::pair{ix, iy};
  };
  std::vector<std::vector<std::uint32_t>> buckets(static_cast<std::size_t>(gx * gy));
  for (std::uint32_t i = 0; i < n; ++i) {
    auto const [ix, iy] = bucket_of(sites[i]);
    buckets[static_cast<std::size_t>(iy * gx + ix)].push_back(i);
  }

  for (std::uint32_t i = 0; i < n; ++i) {
    auto& c = cells[i];
    c.vertices = {{box.min_x, box.min_y}, {box.max_x, box.min_y},
                  {box.max_x, box.max_y}, {box.min_x, box.max_y}};
    c.edge_site = {-1, -1, -1, -1};
    XY const s = sites[i];
    auto const [cx, cy] = bucket_of(s);
    for (std::int64_t r = 0;; ++r) {
      double radius2 = 0.0;
      for (auto const& v : c.vertices) radius2 = std::max(radius2, dist2(v, s));
      // Every site in ring r lies at least (r - 1) * cs away; once that
      // exceeds twice the cell radius no bisector can reach the cell.
      double const reach = static_cast<double>(r - 1) * cs;
      if (r > 0 && reach > 0 && reach * reach > 4.0 * radius2) break;
      if (r > std::max(gx, gy)) break;
      for (std::int64_t y = cy - r; y <= cy + r; ++y) {
        if (y < 0 || y >= gy) continue;
        bool const edge_row = y == cy - r || y == cy + r;
        for (std::int64_t x = cx - r; x <= cx + r; x += (edge_row ? 1 : 2 * r)) {
          if (x >= 0 && x < gx) {
            for (auto const j : buckets[static_cast<std::size_t>(y * gx + x)]) {
              if (j == i) continue;
              XY const t = sites[j];
              XY const nrm{t.x - s.x, t.y - s.y};
              double const d = (t.x * t.x + t.y * t.y - s.x * s.x - s.y * s.y) / 2.0;
              clip(c, nrm, d, static_cast<int>(j), eps);
            }
          }
          if (r == 0) break;
        }
      }
    }
  }
  return cells;
}

MultiPolygon union_cells(std::span<Cell const> cells, std::span<bool const> member,
                         double tolerance) {
  struct Edge {
    XY a, b;
    bool used = false;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!member[i]) continue;
    auto const& c = cells[i];
    auto const m = c.vertices.size();
    for (std::size_t k = 0; k < m; ++k) {
      int const other = c.edge_site[k];
      if (other >= 0 && member[static_cast<std::size_t>(other)]) continue;
      edges.push_back({c.vertices[k], c.vertices[(k + 1) % m]});
    }
  }

  // Index edge starts on a snapping grid; look in neighbouring buckets.
  double const q = std::max(tolerance, 1e-15);
  auto const key = [&](std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ static_cast<std::uint32_t>(y);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> starts;
  auto const cell_of = [&](XY p) {
    return std::pair{static_cast<std::int64_t>(std::floor(p.x / q)),
                     static_cast<std::int64_t>(std::floor(p.y / q))};
  };
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto const [x, y] = cell_of(edges[e].a);
    starts[key(x, y)].push_back(e);
  }
  auto const next_from = [&](XY p) -> std::size_t {
    auto const [x, y] = cell_of(p);
    std::size_t best = edges.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto const it = starts.find(key(x + dx, y + dy));
        if (it == starts.end()) continue;
        for (auto const e : it->second) {
          if (edges[e].used) continue;
          double const d = dist2(edges[e].a, p);
          if (d <= q * q && d < best_d) {
            best = e;
            best_d = d;
          }
        }
      }
    }
    return best;
  };

  std::vector<Ring> rings;
  for (std::size_t e0 = 0; e0 < edges.size(); ++e0) {
    if (edges[e0].used) continue;
    Ring ring;
    std::size_t e = e0;
    while (e < edges.size() && !edges[e].used) {
      edges[e].used = true;
      ring.push_back(edges[e].a);
      if (dist2(edges[e].b, edges[e0].a) <= q * q) break;
      e = next_from(edges[e].b);
    }
    // Vertices where two member cells meet along a straight outer edge.
    for (bool changed = true; changed && ring.size() > 3;) {
      changed = false;
      for (std::size_t i = 0; i < ring.size() && ring.size() > 3; ++i) {
        auto const& prev = ring[(i + ring.size() - 1) % ring.size()];
        auto const& next = ring[(i + 1) % ring.size()];
        if (distance_to_segment(ring[i], prev, next) <= q) {
          ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
          changed = true;
        }
      }
    }
    if (ring.size() >= 3 && std::abs(signed_area(ring)) > q * q) {
      rings.push_back(std::move(ring));
    }
  }

  MultiPolygon out;
  std::vector<Ring> holes;
  for (auto& r : rings) {
    if (signed_area(r) > 0) {
      out.push_back({std::move(r), {}});
    } else {
      holes.push_back(std::move(r));
    }
  }
  for (auto& h : holes) {
    std::size_t best = out.size();
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.size(); ++i) {
      double const a = signed_area(out[i].outer);
      if (a < best_area && ring_contains(out[i].outer, h.front())) {
        best = i;
        best_area = a;
      }
    }
    if (best < out.size()) {
      out[best].holes.push_back(std::move(h));
    } else {
      // Unmatched hole: keep it as its own (reversed) ring so even-odd
      // containment still sees every boundary edge.
      std::reverse(h.begin(), h.end());
      out.push_back({std::move(h), {}});
    }
  }
  return out;
}

bool ring_contains(Ring const& r, XY p) {
  bool in = false;
  for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) {
    auto const& a = r[i];
    auto const& b = r[j];
    if ((a.y > p.y) != (b.y > p.y) &&
        p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      in = !in;
    }
  }
  return in;
}

double distance_to_segment(XY p, XY a, XY b) {
  double const dx = b.x - a.x, dy = b.y - a.y;
  double const len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::sqrt(dist2(p, {a.x + t * dx, a.y + t * dy}));
}

bool contains(MultiPolygon const& mp, XY p, double tolerance) {
  bool in = false;
  auto const visit = [&](Ring const& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (distance_to_segment(p, r[i], r[(i + 1) % r.size()]) <= tolerance) return true;
    }
    in ^= ring_contains(r, p);
    return false;
  };
  for (auto const& poly : mp) {
    if (visit(poly.outer)) return true;
    for (auto const& h : poly.holes) {
      if (visit(h)) return true;
    }
  }
  return in;
}

}  // namespace busroute::geometry
