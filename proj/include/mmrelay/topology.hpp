#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmrelay {

/// Raised for malformed topology or experiment input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Intersection {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct SegmentSpec {
  int id = 0;
  int a = 0;
  int b = 0;
};

struct Segment {
  int id = 0;
  int a = 0;  // "first" endpoint; offsets are measured from here
  int b = 0;
  double length = 0.0;
};

/// A point on the street network: a segment plus the distance from its
/// first endpoint `a`.
struct NodeLocation {
  int segment = 0;
  double offset = 0.0;
};

/// Street-canyon city: intersections joined by straight segments.
/// Immutable after build(); lookups are by external id.
class StreetGraph {
 public:
  static StreetGraph build(std::vector<Intersection> intersections,
                           const std::vector<SegmentSpec>& segments);

  std::span<const Intersection> intersections() const { return intersections_; }
  std::span<const Segment> segments() const { return segments_; }

  const Intersection& intersection(int id) const;
  const Segment& segment(int id) const;
  bool has_segment(int id) const { return segment_index_.contains(id); }
  bool has_intersection(int id) const { return node_index_.contains(id); }

  std::size_t node_index(int intersection_id) const;
  std::size_t segment_index(int segment_id) const;

  struct Edge {
    std::size_t to;       // node index
    std::size_t segment;  // segment index
  };
  std::span<const Edge> neighbors(std::size_t node) const { return adjacency_[node]; }

  /// Shortest along-street distance from one intersection to every other
  /// (indexed by node index).
  std::vector<double> distances_from(std::size_t node) const;

  /// Validates a location; `interior` demands 0 < offset < length.
  void check_location(const NodeLocation& loc, bool interior) const;

 private:
  std::vector<Intersection> intersections_;
  std::vector<Segment> segments_;
  std::vector<std::vector<Edge>> adjacency_;
  std::unordered_map<int, std::size_t> node_index_;
  std::unordered_map<int, std::size_t> segment_index_;
};

/// Length of the shortest along-street route between two locations.
double l1_distance(const StreetGraph& graph, const NodeLocation& a, const NodeLocation& b);

/// Distance from a location to an intersection (by id).
double l1_distance(const StreetGraph& graph, const NodeLocation& a, int intersection_id);

/// One dominant propagation path: an ordered run of consecutive, non-repeating
/// segments whose total length equals the l1 distance between its endpoints.
/// Only segments with positive traversed length appear.
struct PropagationPath {
  std::vector<int> segments;
  int los_segment = 0;                 // first segment, contains the transmitter
  std::vector<int> nlos_segments;      // the rest, in traversal order
  int intersections = 0;               // traversed strictly between the endpoints
  double los_length = 0.0;             // distance travelled on the LoS segment
  double terminal_length = 0.0;        // distance travelled on the last segment
  double length = 0.0;                 // aggregate length
};

/// All minimum-length routes from `from` to `to`, sorted lexicographically
/// by segment-id sequence.
std::vector<PropagationPath> enumerate_paths(const StreetGraph& graph,
                                             const NodeLocation& from,
                                             const NodeLocation& to);

/// Same, ending at an intersection instead of a point on a segment.
std::vector<PropagationPath> enumerate_paths(const StreetGraph& graph,
                                             const NodeLocation& from, int to_intersection);

struct LosSplit {
  int los_segment = 0;
  std::vector<int> nlos_segments;
};

/// LoS is the first segment of the path; everything after it is NLoS except
/// `excluded_segment` (the cluster's own segment), which is dropped.
LosSplit split_los_nlos(const PropagationPath& path, int excluded_segment = -1);

/// Offsets (i - 0.5) * length / delta for i = 1..delta.
std::vector<NodeLocation> relay_positions(const Segment& segment, int delta);

struct ClusterSpec {
  int id = 0;
  int segment = 0;
  int delta = 1;
};

struct ClusterPlacement {
  int id = 0;
  int segment = 0;
  int delta = 1;
  std::vector<NodeLocation> positions;  // sorted by offset
  double d_full = 0.0;
  double d_max = 0.0;
};

ClusterPlacement place_cluster(const StreetGraph& graph, const ClusterSpec& spec);

/// Routes feeding and leaving one cluster. Incoming paths run from the
/// source to `entry_f`, the endpoint of the cluster segment that is
/// l1-closest to the source; outgoing paths are enumerated from the
/// destination to `entry_g` (so their LoS segment is the destination's).
struct ClusterRoutes {
  ClusterPlacement placement;
  int entry_f = 0;
  int entry_g = 0;
  std::vector<double> dist_f;  // d^f(p_i): from entry_f to each position
  std::vector<double> dist_g;  // d^g(p_i): from each position to entry_g
  std::vector<PropagationPath> f_paths;
  std::vector<PropagationPath> g_paths;
  std::vector<int> segments_f;  // unique cluster-free segments, sorted
  std::vector<int> segments_g;
  std::vector<int> segments;    // union of the two, sorted
};

struct TopologySpec {
  std::vector<Intersection> intersections;
  std::vector<SegmentSpec> segments;
  std::vector<ClusterSpec> clusters;
  NodeLocation source;
  NodeLocation destination;
};

/// Graph plus source, destination and clusters with their enumerated routes.
class Deployment {
 public:
  static Deployment build(const TopologySpec& spec);

  const StreetGraph& graph() const { return graph_; }
  const NodeLocation& source() const { return source_; }
  const NodeLocation& destination() const { return destination_; }
  std::span<const ClusterRoutes> clusters() const { return clusters_; }

  /// Union over clusters of all cluster-free segments, sorted by id.
  const std::vector<int>& cluster_free_segments() const { return cluster_free_segments_; }

 private:
  StreetGraph graph_;
  NodeLocation source_;
  NodeLocation destination_;
  std::vector<ClusterRoutes> clusters_;
  std::vector<int> cluster_free_segments_;
};

/// Endpoint of `segment` closest to `from`; ties go to the smaller id.
int closest_endpoint(const StreetGraph& graph, const NodeLocation& from, const Segment& segment);

}  // namespace mmrelay
