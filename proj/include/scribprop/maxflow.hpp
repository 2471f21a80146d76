#pragma once

#include <vector>

namespace scribprop {

/// Directed network with real capacities. Arcs come in pairs: arc 2k is the
/// one added, arc 2k+1 its reverse.
class FlowNetwork {
 public:
  struct Arc {
    int from;
    int to;
    double capacity;
  };

  FlowNetwork() = default;
  FlowNetwork(int node_count, int source, int sink);

  int add_node();
  /// Returns the index of the forward arc.
  int add_arc(int from, int to, double capacity, double reverse_capacity = 0.0);

  int node_count() const { return node_count_; }
  int source() const { return source_; }
  int sink() const { return sink_; }
  const std::vector<Arc>& arcs() const { return arcs_; }

 private:
  int node_count_ = 2;
  int source_ = 0;
  int sink_ = 1;
  std::vector<Arc> arcs_;
};

struct CutResult {
  double max_flow_value = 0.0;
  std::vector<bool> source_side;
  /// Flow on each arc (same indexing as FlowNetwork::arcs), >= 0; at most one
  /// arc of a pair carries flow.
  std::vector<double> arc_flow;
};

/// Tree-reuse augmenting paths (search trees grown from both terminals,
/// augmented, and repaired by orphan adoption). Deterministic in arc order.
CutResult max_flow(const FlowNetwork& net);

/// Sum of capacities of arcs leaving the source side.
double cut_capacity(const FlowNetwork& net, const std::vector<bool>& source_side);

}  // namespace scribprop
