#include "mmrelay/topology.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mmrelay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tolerance_for(double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

// Where a route may leave (or enter) a location: an intersection, the cost of
// reaching it, and the segment travelled on the way (none for a location
// sitting on the intersection itself).
struct Exit {
  std::size_t node;
  double cost;
  std::ptrdiff_t segment;  // segment index or -1
};

struct Anchor {
  std::vector<Exit> exits;
  std::ptrdiff_t interior_segment = -1;
  double offset = 0.0;
};

Anchor anchor_at(const StreetGraph& g, const NodeLocation& loc) {
  g.check_location(loc, false);
  const std::size_t si = g.segment_index(loc.segment);
  const Segment& s = g.segments()[si];
  const double tol = tolerance_for(s.length);
  Anchor anchor;
  if (loc.offset <= tol) {
    anchor.exits.push_back({g.node_index(s.a), 0.0, -1});
  } else if (loc.offset >= s.length - tol) {
    anchor.exits.push_back({g.node_index(s.b), 0.0, -1});
  } else {
    anchor.exits.push_back({g.node_index(s.a), loc.offset, static_cast<std::ptrdiff_t>(si)});
    anchor.exits.push_back(
        {g.node_index(s.b), s.length - loc.offset, static_cast<std::ptrdiff_t>(si)});
    anchor.interior_segment = static_cast<std::ptrdiff_t>(si);
    anchor.offset = loc.offset;
  }
  return anchor;
}

Anchor anchor_at(const StreetGraph& g, int intersection_id) {
  Anchor anchor;
  anchor.exits.push_back({g.node_index(intersection_id), 0.0, -1});
  return anchor;
}

double anchor_distance(const StreetGraph& g, const Anchor& from, const Anchor& to) {
  double best = kInf;
  if (from.interior_segment >= 0 && from.interior_segment == to.interior_segment) {
    best = std::abs(from.offset - to.offset);
  }
  for (const Exit& e : from.exits) {
    const auto dist = g.distances_from(e.node);
    for (const Exit& x : to.exits) {
      best = std::min(best, e.cost + dist[x.node] + x.cost);
    }
  }
  return best;
}

std::vector<PropagationPath> anchor_paths(const StreetGraph& g, const Anchor& from,
                                          const Anchor& to) {
  const double total = anchor_distance(g, from, to);
  if (!std::isfinite(total)) {
    throw ConfigError("locations are not connected");
  }
  if (total <= 0.0) {
    throw std::invalid_argument("enumerate_paths: endpoints coincide");
  }
  const double tol = tolerance_for(total);
  const auto segs = g.segments();

  std::set<std::vector<std::size_t>> routes;  // segment indices
  if (from.interior_segment >= 0 && from.interior_segment == to.interior_segment &&
      std::abs(std::abs(from.offset - to.offset) - total) <= tol) {
    routes.insert({static_cast<std::size_t>(from.interior_segment)});
  }

  for (const Exit& x : to.exits) {
    const auto to_target = g.distances_from(x.node);
    for (const Exit& e : from.exits) {
      if (std::abs(e.cost + to_target[e.node] + x.cost - total) > tol) continue;
      std::vector<std::size_t> trail;
      if (e.segment >= 0) trail.push_back(static_cast<std::size_t>(e.segment));
      std::function<void(std::size_t)> walk = [&](std::size_t node) {
        if (node == x.node) {
          auto route = trail;
          if (x.segment >= 0) route.push_back(static_cast<std::size_t>(x.segment));
          std::unordered_set<std::size_t> seen(route.begin(), route.end());
          if (seen.size() == route.size() && !route.empty()) routes.insert(route);
          return;
        }
        for (const auto& edge : g.neighbors(node)) {
          const double len = segs[edge.segment].length;
          if (std::abs(to_target[node] - len - to_target[edge.to]) > tol) continue;
          trail.push_back(edge.segment);
          walk(edge.to);
          trail.pop_back();
        }
      };
      walk(e.node);
    }
  }

  std::vector<PropagationPath> out;
  out.reserve(routes.size());
  for (const auto& route : routes) {
    PropagationPath p;
    for (std::size_t si : route) p.segments.push_back(segs[si].id);
    p.los_segment = p.segments.front();
    p.nlos_segments.assign(p.segments.begin() + 1, p.segments.end());
    p.intersections = static_cast<int>(p.segments.size()) - 1;
    p.length = total;
    if (route.size() == 1) {
      p.los_length = total;
      p.terminal_length = total;
    } else {
      auto shared_node = [&](std::size_t s0, std::size_t s1) {
        const Segment& a = segs[s0];
        const Segment& b = segs[s1];
        return (a.a == b.a || a.a == b.b) ? a.a : a.b;
      };
      // The first and last legs are partial when the endpoint is interior.
      double first = segs[route.front()].length;
      double last = segs[route.back()].length;
      if (from.interior_segment == static_cast<std::ptrdiff_t>(route.front())) {
        const Segment& s0 = segs[route.front()];
        first = shared_node(route[0], route[1]) == s0.a ? from.offset : s0.length - from.offset;
      }
      if (to.interior_segment == static_cast<std::ptrdiff_t>(route.back())) {
        const std::size_t n = route.size();
        const Segment& sn = segs[route.back()];
        last = shared_node(route[n - 1], route[n - 2]) == sn.a ? to.offset : sn.length - to.offset;
      }
      p.los_length = first;
      p.terminal_length = last;
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(),
            [](const PropagationPath& a, const PropagationPath& b) { return a.segments < b.segments; });
  return out;
}

}  // namespace

StreetGraph StreetGraph::build(std::vector<Intersection> intersections,
                               const std::vector<SegmentSpec>& segments) {
  StreetGraph g;
  if (intersections.empty()) throw ConfigError("topology has no intersections");
  for (std::size_t i = 0; i < intersections.size(); ++i) {
    const auto& n = intersections[i];
    if (!std::isfinite(n.x) || !std::isfinite(n.y)) {
      throw ConfigError("intersection " + std::to_string(n.id) + " has non-finite coordinates");
    }
    if (!g.node_index_.emplace(n.id, i).second) {
      throw ConfigError("duplicate intersection id " + std::to_string(n.id));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (intersections[j].x == n.x && intersections[j].y == n.y) {
        throw ConfigError("intersections " + std::to_string(intersections[j].id) + " and " +
                          std::to_string(n.id) + " share coordinates");
      }
    }
  }
  g.intersections_ = std::move(intersections);
  g.adjacency_.resize(g.intersections_.size());

  std::set<std::pair<int, int>> pairs;
  for (const auto& spec : segments) {
    if (!g.node_index_.contains(spec.a) || !g.node_index_.contains(spec.b)) {
      throw ConfigError("segment " + std::to_string(spec.id) + " references an unknown intersection");
    }
    if (spec.a == spec.b) throw ConfigError("segment " + std::to_string(spec.id) + " is a self-loop");
    if (!pairs.emplace(std::min(spec.a, spec.b), std::max(spec.a, spec.b)).second) {
      throw ConfigError("more than one segment joins intersections " + std::to_string(spec.a) +
                        " and " + std::to_string(spec.b));
    }
    const std::size_t si = g.segments_.size();
    if (!g.segment_index_.emplace(spec.id, si).second) {
      throw ConfigError("duplicate segment id " + std::to_string(spec.id));
    }
    const auto& pa = g.intersection(spec.a);
    const auto& pb = g.intersection(spec.b);
    const double length = std::hypot(pa.x - pb.x, pa.y - pb.y);
    if (!(length > 0.0)) throw ConfigError("segment " + std::to_string(spec.id) + " has zero length");
    g.segments_.push_back({spec.id, spec.a, spec.b, length});
    const std::size_t ia = g.node_index(spec.a);
    const std::size_t ib = g.node_index(spec.b);
    g.adjacency_[ia].push_back({ib, si});
    g.adjacency_[ib].push_back({ia, si});
  }

  const auto dist = g.distances_from(0);
  if (std::any_of(dist.begin(), dist.end(), [](double d) { return !std::isfinite(d); })) {
    throw ConfigError("street graph is disconnected");
  }
  return g;
}

const Intersection& StreetGraph::intersection(int id) const {
  return intersections_[node_index(id)];
}

const Segment& StreetGraph::segment(int id) const { return segments_[segment_index(id)]; }

std::size_t StreetGraph::node_index(int intersection_id) const {
  auto it = node_index_.find(intersection_id);
  if (it == node_index_.end()) {
    throw ConfigError("unknown intersection id " + std::to_string(intersection_id));
  }
  return it->second;
}

std::size_t StreetGraph::segment_index(int segment_id) const {
  auto it = segment_index_.find(segment_id);
  if (it == segment_index_.end()) {
    throw ConfigError("unknown segment id " + std::to_string(segment_id));
  }
  return it->second;
}

std::vector<double> StreetGraph::distances_from(std::size_t node) const {
  std::vector<double> dist(intersections_.size(), kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[node] = 0.0;
  queue.emplace(0.0, node);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (const auto& e : adjacency_[u]) {
      const double nd = d + segments_[e.segment].length;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        queue.emplace(nd, e.to);
      }
    }
  }
  return dist;
}

void StreetGraph::check_location(const NodeLocation& loc, bool interior) const {
  const Segment& s = segment(loc.segment);
  const bool ok = interior ? (loc.offset > 0.0 && loc.offset < s.length)
                           : (loc.offset >= 0.0 && loc.offset <= s.length);
  if (!ok || !std::isfinite(loc.offset)) {
    std::ostringstream os;
    os << "offset " << loc.offset << " is outside " << (interior ? "(0, " : "[0, ") << s.length
       << (interior ? ")" : "]") << " on segment " << loc.segment;
    throw ConfigError(os.str());
  }
}

double l1_distance(const StreetGraph& graph, const NodeLocation& a, const NodeLocation& b) {
  const double d = anchor_distance(graph, anchor_at(graph, a), anchor_at(graph, b));
  if (!std::isfinite(d)) throw ConfigError("locations are not connected");
  return d;
}

double l1_distance(const StreetGraph& graph, const NodeLocation& a, int intersection_id) {
  const double d = anchor_distance(graph, anchor_at(graph, a), anchor_at(graph, intersection_id));
  if (!std::isfinite(d)) throw ConfigError("locations are not connected");
  return d;
}

std::vector<PropagationPath> enumerate_paths(const StreetGraph& graph, const NodeLocation& from,
                                             const NodeLocation& to) {
  return anchor_paths(graph, anchor_at(graph, from), anchor_at(graph, to));
}

std::vector<PropagationPath> enumerate_paths(const StreetGraph& graph, const NodeLocation& from,
                                             int to_intersection) {
  return anchor_paths(graph, anchor_at(graph, from), anchor_at(graph, to_intersection));
}

LosSplit split_los_nlos(const PropagationPath& path, int excluded_segment) {
  if (path.segments.empty()) throw std::invalid_argument("split_los_nlos: empty path");
  LosSplit split;
  split.los_segment = path.segments.front();
  for (std::size_t k = 1; k < path.segments.size(); ++k) {
    if (path.segments[k] != excluded_segment) split.nlos_segments.push_back(path.segments[k]);
  }
  return split;
}

std::vector<NodeLocation> relay_positions(const Segment& segment, int delta) {
  if (delta < 1) throw std::invalid_argument("relay_positions: delta must be >= 1");
  std::vector<NodeLocation> out;
  out.reserve(static_cast<std::size_t>(delta));
  for (int i = 1; i <= delta; ++i) {
    out.push_back({segment.id, (i - 0.5) * segment.length / delta});
  }
  return out;
}

ClusterPlacement place_cluster(const StreetGraph& graph, const ClusterSpec& spec) {
  if (spec.delta < 1) {
    throw ConfigError("cluster " + std::to_string(spec.id) + " needs delta >= 1");
  }
  const Segment& s = graph.segment(spec.segment);
  ClusterPlacement c;
  c.id = spec.id;
  c.segment = spec.segment;
  c.delta = spec.delta;
  c.positions = relay_positions(s, spec.delta);
  c.d_full = s.length;
  c.d_max = c.positions.back().offset - c.positions.front().offset;
  return c;
}

int closest_endpoint(const StreetGraph& graph, const NodeLocation& from, const Segment& segment) {
  const double da = l1_distance(graph, from, segment.a);
  const double db = l1_distance(graph, from, segment.b);
  if (std::abs(da - db) <= tolerance_for(std::max(da, db))) return std::min(segment.a, segment.b);
  return da < db ? segment.a : segment.b;
}

Deployment Deployment::build(const TopologySpec& spec) {
  Deployment d;
  d.graph_ = StreetGraph::build(spec.intersections, spec.segments);
  d.graph_.check_location(spec.source, true);
  d.graph_.check_location(spec.destination, true);
  d.source_ = spec.source;
  d.destination_ = spec.destination;
  if (spec.clusters.empty()) throw ConfigError("topology has no relay clusters");

  std::set<int> ids;
  std::set<int> used_segments;
  std::set<int> all_free;
  for (const auto& cs : spec.clusters) {
    if (!ids.insert(cs.id).second) throw ConfigError("duplicate cluster id " + std::to_string(cs.id));
    if (!used_segments.insert(cs.segment).second) {
      throw ConfigError("segment " + std::to_string(cs.segment) + " hosts more than one cluster");
    }
    if (cs.segment == spec.source.segment || cs.segment == spec.destination.segment) {
      throw ConfigError("cluster " + std::to_string(cs.id) +
                        " shares a segment with the source or destination");
    }
    ClusterRoutes r;
    r.placement = place_cluster(d.graph_, cs);
    const Segment& s = d.graph_.segment(cs.segment);
    r.entry_f = closest_endpoint(d.graph_, spec.source, s);
    r.entry_g = closest_endpoint(d.graph_, spec.destination, s);
    for (const auto& p : r.placement.positions) {
      r.dist_f.push_back(r.entry_f == s.a ? p.offset : s.length - p.offset);
      r.dist_g.push_back(r.entry_g == s.a ? p.offset : s.length - p.offset);
    }
    r.f_paths = enumerate_paths(d.graph_, spec.source, r.entry_f);
    r.g_paths = enumerate_paths(d.graph_, spec.destination, r.entry_g);

    std::set<int> f, g;
    for (const auto& p : r.f_paths) f.insert(p.segments.begin(), p.segments.end());
    for (const auto& p : r.g_paths) g.insert(p.segments.begin(), p.segments.end());
    if (f.contains(cs.segment) || g.contains(cs.segment)) {
      throw ConfigError("a dominant path to cluster " + std::to_string(cs.id) +
                        " runs along its own segment");
    }
    r.segments_f.assign(f.begin(), f.end());
    r.segments_g.assign(g.begin(), g.end());
    std::set<int> both = f;
    both.insert(g.begin(), g.end());
    r.segments.assign(both.begin(), both.end());
    all_free.insert(both.begin(), both.end());
    d.clusters_.push_back(std::move(r));
  }
  d.cluster_free_segments_.assign(all_free.begin(), all_free.end());
  return d;
}

}  // namespace mmrelay
