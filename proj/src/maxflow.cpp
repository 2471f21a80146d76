#include "scribprop/maxflow.hpp"

#include "scribprop/core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace scribprop {

FlowNetwork::FlowNetwork(int node_count, int source, int sink)
    : node_count_(node_count), source_(source), sink_(sink) {
  if (node_count < 2 || source < 0 || sink < 0 || source >= node_count || sink >= node_count || source == sink) {
    throw Error(ErrorCode::InvalidParameter, "flow network needs distinct source and sink nodes");
  }
}

int FlowNetwork::add_node() { return node_count_++; }

int FlowNetwork::add_arc(int from, int to, double capacity, double reverse_capacity) {
  if (from < 0 || to < 0 || from >= node_count_ || to >= node_count_) {
    throw Error(ErrorCode::InvalidParameter, "arc endpoint out of range");
  }
  if (!(capacity >= 0.0) || !(reverse_capacity >= 0.0) || !std::isfinite(capacity) ||
      !std::isfinite(reverse_capacity)) {
    throw Error(ErrorCode::InvalidParameter, "capacities must be finite and >= 0");
  }
  arcs_.push_back({from, to, capacity});
  arcs_.push_back({to, from, reverse_capacity});
  return static_cast<int>(arcs_.size()) - 2;
}

namespace {

enum class Tree : unsigned char { Free, Source, Sink };

constexpr int kNoParent = -1;
constexpr int kTerminal = -2;
constexpr int kOrphan = -3;
constexpr int kInfiniteDist = std::numeric_limits<int>::max();

class BkSolver {
 public:
  explicit BkSolver(const FlowNetwork& net)
      : net_(net),
        n_(net.node_count()),
        residual_(net.arcs().size()),
        out_(n_),
        tree_(n_, Tree::Free),
        parent_(n_, kNoParent),
        timestamp_(n_, 0),
        dist_(n_, 0),
        active_(n_, false) {
    const auto& arcs = net.arcs();
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      residual_[a] = arcs[a].capacity;
      out_[arcs[a].from].push_back(static_cast<int>(a));
    }
  }

  CutResult solve() {
    const int s = net_.source();
    const int t = net_.sink();
    tree_[s] = Tree::Source;
    tree_[t] = Tree::Sink;
    parent_[s] = parent_[t] = kTerminal;
    dist_[s] = dist_[t] = 0;
    activate(s);
    activate(t);

    double flow = 0.0;
    while (true) {
      const int meeting = grow();
      if (meeting < 0) break;
      ++time_;
      flow += augment(meeting);
      adopt();
    }

    CutResult result;
    result.max_flow_value = flow;
    result.source_side.resize(n_);
    for (int v = 0; v < n_; ++v) result.source_side[v] = tree_[v] == Tree::Source;
    const auto& arcs = net_.arcs();
    result.arc_flow.assign(arcs.size(), 0.0);
    for (std::size_t a = 0; a + 1 < arcs.size(); a += 2) {
      const double net_flow = arcs[a].capacity - residual_[a];
      if (net_flow > 0.0) {
        result.arc_flow[a] = net_flow;
      } else if (net_flow < 0.0) {
        result.arc_flow[a + 1] = -net_flow;
      }
    }
    return result;
  }

 private:
  int head(int a) const { return net_.arcs()[a].to; }
  int tail(int a) const { return net_.arcs()[a].from; }

  void activate(int v) {
    if (!active_[v]) {
      active_[v] = true;
      queue_.push_back(v);
    }
  }

  // Returns an arc from the source tree into the sink tree with residual
  // capacity, or -1 when both trees are exhausted.
  int grow() {
    while (!queue_.empty()) {
      const int p = queue_.front();
      if (!active_[p] || tree_[p] == Tree::Free) {
        active_[p] = false;
        queue_.pop_front();
        continue;
      }
      for (int a : out_[p]) {
        const int q = head(a);
        if (tree_[p] == Tree::Source) {
          if (residual_[a] <= 0.0) continue;
          if (tree_[q] == Tree::Free) {
            tree_[q] = Tree::Source;
            parent_[q] = a;
            timestamp_[q] = timestamp_[p];
            dist_[q] = dist_[p] + 1;
            activate(q);
          } else if (tree_[q] == Tree::Sink) {
            return a;
          }
        } else {
          const int rev = a ^ 1;
          if (residual_[rev] <= 0.0) continue;
          if (tree_[q] == Tree::Free) {
            tree_[q] = Tree::Sink;
            parent_[q] = rev;
            timestamp_[q] = timestamp_[p];
            dist_[q] = dist_[p] + 1;
            activate(q);
          } else if (tree_[q] == Tree::Source) {
            return rev;
          }
        }
      }
      active_[p] = false;
      queue_.pop_front();
    }
    return -1;
  }

  double augment(int bridge) {
    double bottleneck = residual_[bridge];
    for (int v = tail(bridge); parent_[v] != kTerminal; v = tail(parent_[v])) {
      bottleneck = std::min(bottleneck, residual_[parent_[v]]);
    }
    for (int v = head(bridge); parent_[v] != kTerminal; v = head(parent_[v])) {
      bottleneck = std::min(bottleneck, residual_[parent_[v]]);
    }
    push(bridge, bottleneck);
    for (int v = tail(bridge); parent_[v] != kTerminal;) {
      const int a = parent_[v];
      const int up = tail(a);
      push(a, bottleneck);
      if (residual_[a] <= 0.0) make_orphan(v);
      v = up;
    }
    for (int v = head(bridge); parent_[v] != kTerminal;) {
      const int a = parent_[v];
      const int up = head(a);
      push(a, bottleneck);
      if (residual_[a] <= 0.0) make_orphan(v);
      v = up;
    }
    return bottleneck;
  }

  void push(int a, double amount) {
    residual_[a] -= amount;
    residual_[a ^ 1] += amount;
  }

  void make_orphan(int v) {
    parent_[v] = kOrphan;
    orphans_.push_back(v);
  }

  // Distance to the tree root via parent links, or kInfiniteDist when the
  // chain ends in an orphan. Nodes stamped with the current time carry a
  // verified distance.
  int origin_distance(int q) {
    int d = 0;
    int v = q;
    while (true) {
      if (timestamp_[v] == time_) {
        d += dist_[v];
        break;
      }
      const int a = parent_[v];
      if (a == kTerminal) {
        timestamp_[v] = time_;
        dist_[v] = 0;
        break;
      }
      if (a == kOrphan || a == kNoParent) return kInfiniteDist;
      ++d;
      v = up(v);
    }
    int remaining = d;
    for (int u = q; timestamp_[u] != time_; u = up(u)) {
      timestamp_[u] = time_;
      dist_[u] = remaining--;
    }
    return d;
  }

  int up(int v) const {
    const int a = parent_[v];
    return tree_[v] == Tree::Source ? tail(a) : head(a);
  }

  void adopt() {
    while (!orphans_.empty()) {
      const int p = orphans_.front();
      orphans_.pop_front();
      const Tree side = tree_[p];
      int best_arc = kNoParent;
      int best_dist = kInfiniteDist;
      for (int a : out_[p]) {
        const int q = head(a);
        if (tree_[q] != side) continue;
        const int candidate = side == Tree::Source ? (a ^ 1) : a;
        if (residual_[candidate] <= 0.0) continue;
        const int d = origin_distance(q);
        if (d < best_dist) {
          best_dist = d;
          best_arc = candidate;
        }
      }
      if (best_arc != kNoParent) {
        parent_[p] = best_arc;
        timestamp_[p] = time_;
        dist_[p] = best_dist + 1;
        continue;
      }
      for (int a : out_[p]) {
        const int q = head(a);
        if (tree_[q] != side) continue;
        const int toward_p = side == Tree::Source ? (a ^ 1) : a;
        if (residual_[toward_p] > 0.0) activate(q);
        const int child_arc = side == Tree::Source ? a : (a ^ 1);
        if (parent_[q] == child_arc) make_orphan(q);
      }
      tree_[p] = Tree::Free;
      parent_[p] = kNoParent;
      active_[p] = false;
    }
  }

  const FlowNetwork& net_;
  int n_;
  std::vector<double> residual_;
  std::vector<std::vector<int>> out_;
  std::vector<Tree> tree_;
  std::vector<int> parent_;
  std::vector<int> timestamp_;
  std::vector<int> dist_;
  std::vector<bool> active_;
  std::deque<int> queue_;
  std::deque<int> orphans_;
  int time_ = 0;
};

}  // namespace

CutResult max_flow(const FlowNetwork& net) { return BkSolver(net).solve(); }

double cut_capacity(const FlowNetwork& net, const std::vector<bool>& source_side) {
  double total = 0.0;
  for (const auto& arc : net.arcs()) {
    if (source_side[arc.from] && !source_side[arc.to]) total += arc.capacity;
  }
  return total;
}

}  // namespace scribprop
