#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfr/error.hpp"
#include "hfr/matrix.hpp"

namespace hfr {

struct HierarchyNode {
  std::string id;
  int level = 0;
  int parent = -1;  // index into Hierarchy::nodes(), -1 for the root
};

// A strict rooted tree with all leaves at the same depth. Node order is
// level-major: all level-i nodes precede all level-(i+1) nodes, ties within
// a level broken by the order the defining edge appeared in the input.
// Every matrix and panel in the library inherits this ordering.
class Hierarchy {
 public:
  static Hierarchy from_edges(const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t m() const { return nodes_.size(); }
  std::size_t bottom_count() const { return level_counts_.empty() ? 0 : level_counts_.back(); }
  int depth() const { return static_cast<int>(level_counts_.size()) - 1; }  // k

  const std::vector<HierarchyNode>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& level_counts() const { return level_counts_; }

  // First node index of a level; nodes of level l occupy
  // [level_offset(l), level_offset(l) + level_counts()[l]).
  std::size_t level_offset(int level) const { return level_offsets_[static_cast<std::size_t>(level)]; }

  std::span<const int> children(int node) const {
    return {children_flat_.data() + children_start_[static_cast<std::size_t>(node)],
            children_start_[static_cast<std::size_t>(node) + 1] -
                children_start_[static_cast<std::size_t>(node)]};
  }

  // Bottom-level descendants of a node, as positions 0..m_k-1.
  std::span<const int> bottom_descendants(int node) const {
    return {bottom_flat_.data() + bottom_start_[static_cast<std::size_t>(node)],
            bottom_start_[static_cast<std::size_t>(node) + 1] -
                bottom_start_[static_cast<std::size_t>(node)]};
  }

  bool is_bottom(int node) const {
    return nodes_[static_cast<std::size_t>(node)].level == depth();
  }

  // Position of a bottom node among the bottom level (0..m_k-1), -1 otherwise.
  int bottom_order(int node) const { return bottom_order_[static_cast<std::size_t>(node)]; }

  // Node index of the j-th bottom series.
  int bottom_node(int j) const {
    return static_cast<int>(level_offset(depth())) + j;
  }

  int node_index(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
  }

  std::vector<std::string> node_ids() const {
    std::vector<std::string> ids;
    ids.reserve(nodes_.size());
    for (const auto& n : nodes_) ids.push_back(n.id);
    return ids;
  }

 private:
  std::vector<HierarchyNode> nodes_;
  std::vector<std::size_t> level_counts_;
  std::vector<std::size_t> level_offsets_;
  std::vector<int> children_flat_;
  std::vector<std::size_t> children_start_;
  std::vector<int> bottom_flat_;
  std::vector<std::size_t> bottom_start_;
  std::vector<int> bottom_order_;
  std::map<std::string, int> index_;

  void finish();
};

inline Hierarchy Hierarchy::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  if (edges.empty()) throw DataError(errc::invalid_edge, "no edges");

  struct Raw {
    int parent = -1;     // raw index
    long edge_rank = -1; // index of the edge that introduced the node as child
  };
  std::vector<std::string> ids;
  std::map<std::string, int> raw_index;
  std::vector<Raw> raw;
  auto intern = [&](const std::string& id) {
    auto it = raw_index.find(id);
    if (it != raw_index.end()) return it->second;
    const int idx = static_cast<int>(ids.size());
    raw_index.emplace(id, idx);
    ids.push_back(id);
    raw.push_back(Raw{});
    return idx;
  };

  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& [pid, cid] = edges[e];
    if (pid.empty() || cid.empty())
      throw DataError(errc::invalid_edge, "empty node id in edge " + std::to_string(e + 1));
    if (pid == cid)
      throw DataError(errc::cycle_detected, "self edge on node '" + pid + "'");
    const int p = intern(pid);
    const int c = intern(cid);
    if (raw[static_cast<std::size_t>(c)].edge_rank >= 0)
      throw DataError(errc::invalid_edge,
                      "node '" + cid + "' has more than one parent; only strict trees are supported");
    raw[static_cast<std::size_t>(c)].parent = p;
    raw[static_cast<std::size_t>(c)].edge_rank = static_cast<long>(e);
  }

  // Root = the unique node that never appears as a child.
  std::vector<int> roots;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i].edge_rank < 0) roots.push_back(static_cast<int>(i));
  if (roots.empty())
    throw DataError(errc::cycle_detected, "every node has a parent; the edge list contains a cycle");
  if (roots.size() > 1) {
    std::string msg = "multiple roots:";
    for (int r : roots) msg += " '" + ids[static_cast<std::size_t>(r)] + "'";
    throw DataError(errc::multiple_roots, msg);
  }

  // Levels by root distance; detects nodes not connected to the root.
  const std::size_t n = raw.size();
  std::vector<int> level(n, -1);
  level[static_cast<std::size_t>(roots[0])] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (level[i] >= 0) continue;
    std::vector<int> chain;
    int cur = static_cast<int>(i);
    while (cur >= 0 && level[static_cast<std::size_t>(cur)] < 0) {
      chain.push_back(cur);
      if (static_cast<std::size_t>(chain.size()) > n)
        throw DataError(errc::cycle_detected, "cycle through node '" + ids[i] + "'");
      cur = raw[static_cast<std::size_t>(cur)].parent;
    }
    if (cur < 0)
      throw DataError(errc::disconnected_node, "node '" + ids[i] + "' is not connected to the root");
    int l = level[static_cast<std::size_t>(cur)];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) level[static_cast<std::size_t>(*it)] = ++l;
  }

  // Level-major order, ties by edge order (root first).
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto la = level[static_cast<std::size_t>(a)], lb = level[static_cast<std::size_t>(b)];
    if (la != lb) return la < lb;
    return raw[static_cast<std::size_t>(a)].edge_rank < raw[static_cast<std::size_t>(b)].edge_rank;
  });
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[static_cast<std::size_t>(order[i])] = static_cast<int>(i);

  Hierarchy h;
  h.nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = order[i];
    auto& node = h.nodes_[i];
    node.id = ids[static_cast<std::size_t>(r)];
    node.level = level[static_cast<std::size_t>(r)];
    node.parent = raw[static_cast<std::size_t>(r)].parent < 0
                      ? -1
                      : pos[static_cast<std::size_t>(raw[static_cast<std::size_t>(r)].parent)];
    h.index_.emplace(node.id, static_cast<int>(i));
  }
  h.finish();
  return h;
}

inline void Hierarchy::finish() {
  const std::size_t n = nodes_.size();
  const int k = std::max_element(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) {
                  return a.level < b.level;
                })->level;

  level_counts_.assign(static_cast<std::size_t>(k) + 1, 0);
  for (const auto& node : nodes_) ++level_counts_[static_cast<std::size_t>(node.level)];
  level_offsets_.assign(level_counts_.size() + 1, 0);
  for (std::size_t l = 0; l < level_counts_.size(); ++l)
    level_offsets_[l + 1] = level_offsets_[l] + level_counts_[l];
  level_offsets_.pop_back();
  if (level_counts_[0] != 1)
    throw DataError(errc::multiple_roots, "expected exactly one level-0 node");

  // Children lists (preserving node order).
  children_start_.assign(n + 1, 0);
  for (const auto& node : nodes_)
    if (node.parent >= 0) ++children_start_[static_cast<std::size_t>(node.parent) + 1];
  for (std::size_t i = 0; i < n; ++i) children_start_[i + 1] += children_start_[i];
  children_flat_.resize(children_start_[n]);
  {
    std::vector<std::size_t> fill(children_start_.begin(), children_start_.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (nodes_[i].parent >= 0)
        children_flat_[fill[static_cast<std::size_t>(nodes_[i].parent)]++] = static_cast<int>(i);
  }

  // A leaf above the bottom level would make the summing matrix ill-formed.
  for (std::size_t i = 0; i < n; ++i)
    if (nodes_[i].level < k && children(static_cast<int>(i)).empty())
      throw DataError(errc::invalid_edge, "node '" + nodes_[i].id + "' at level " +
                                              std::to_string(nodes_[i].level) +
                                              " has no children but the bottom level is " +
                                              std::to_string(k));

  bottom_order_.assign(n, -1);
  const std::size_t bottom_off = level_offsets_[static_cast<std::size_t>(k)];
  for (std::size_t j = 0; j < level_counts_[static_cast<std::size_t>(k)]; ++j)
    bottom_order_[bottom_off + j] = static_cast<int>(j);

  // Bottom descendants per node, gathered bottom-up.
  std::vector<std::vector<int>> desc(n);
  for (std::size_t r = n; r-- > 0;) {
    if (bottom_order_[r] >= 0) {
      desc[r].push_back(bottom_order_[r]);
    } else {
      for (int c : children(static_cast<int>(r)))
        desc[r].insert(desc[r].end(), desc[static_cast<std::size_t>(c)].begin(),
                       desc[static_cast<std::size_t>(c)].end());
      std::sort(desc[r].begin(), desc[r].end());
    }
  }
  bottom_start_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) bottom_start_[i + 1] = bottom_start_[i] + desc[i].size();
  bottom_flat_.resize(bottom_start_[n]);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(desc[i].begin(), desc[i].end(), bottom_flat_.begin() + static_cast<long>(bottom_start_[i]));
}

// ---------------------------------------------------------------------------
// Summing matrix
// ---------------------------------------------------------------------------

// Binary m x m_k matrix: entry (i, j) = 1 iff bottom series j is a
// descendant-or-self of node i. Its bottom block is the identity and the
// root row is all ones.
struct SummingMatrix {
  Matrix entries;  // m x m_k
  std::size_t rows() const { return entries.rows(); }
  std::size_t cols() const { return entries.cols(); }
};

inline SummingMatrix summing_matrix(const Hierarchy& h) {
  SummingMatrix s{Matrix(h.m(), h.bottom_count())};
  for (std::size_t i = 0; i < h.m(); ++i)
    for (int j : h.bottom_descendants(static_cast<int>(i)))
      s.entries(i, static_cast<std::size_t>(j)) = 1.0;
  return s;
}

inline std::vector<double> aggregate_bottom(const SummingMatrix& s, std::span<const double> bottom) {
  if (bottom.size() != s.cols())
    throw Error(errc::dimension_mismatch, "aggregate_bottom: expected " + std::to_string(s.cols()) +
                                              " bottom values, got " + std::to_string(bottom.size()));
  return matvec(s.entries, bottom);
}

// True iff y equals S * (bottom block of y) within rel_tol, measured in the
// max norm relative to max(1, |y|_inf).
inline bool coherence_check(const SummingMatrix& s, std::span<const double> y, double rel_tol) {
  if (y.size() != s.rows())
    throw Error(errc::dimension_mismatch, "coherence_check: expected " + std::to_string(s.rows()) +
                                              " values, got " + std::to_string(y.size()));
  if (rel_tol <= 0.0) throw Error(errc::dimension_mismatch, "coherence_check: rel_tol must be > 0");
  const std::size_t mk = s.cols();
  const std::span<const double> bottom = y.subspan(y.size() - mk, mk);
  const std::vector<double> agg = aggregate_bottom(s, bottom);
  double err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(y[i] - agg[i]));
  return err <= rel_tol * std::max(1.0, max_abs(y));
}

}  // namespace hfr
