#pragma once

#include <vector>

#include "rng.hpp"

namespace abcf {

// Uniform grid of candidate cutpoints per covariate, strictly interior to the
// observed range. A constant covariate gets an empty grid and is never split.
struct CutGrid {
  std::vector<std::vector<double>> cuts;

  int n_vars() const { return static_cast<int>(cuts.size()); }
  int n_cuts(int var) const { return static_cast<int>(cuts[var].size()); }

  // x is row-major n-by-p.
  static CutGrid from_data(const double* x, int n, int p, int n_cuts);
};

struct TreeNode {
  int parent = -1;
  int left = -1, right = -1;  // -1 when leaf
  int var = -1, cut = -1;     // split rule, valid when internal
  double leaf = 0.0;          // valid when leaf
  bool is_leaf() const { return left < 0; }
};

// Binary regression tree with value semantics (node slots recycled via a free
// list, so copies are cheap flat-vector copies — trees stay tiny under the
// depth prior).
class Tree {
 public:
  Tree();  // single zero-valued stump

  int root() const { return 0; }
  bool is_stump() const { return nodes_[0].is_leaf(); }
  const TreeNode& node(int id) const { return nodes_[id]; }
  double leaf_value(int id) const { return nodes_[id].leaf; }
  void set_leaf_value(int id, double v) { nodes_[id].leaf = v; }
  // Upper bound on node ids in use (for id-indexed scratch arrays).
  int id_bound() const { return static_cast<int>(nodes_.size()); }

  int depth(int id) const;
  int leaf_index(const double* row, const CutGrid& grid) const {
    return leaf_index_from(0, row, grid);
  }
  int leaf_index_from(int start, const double* row, const CutGrid& grid) const;

  // Node lists in deterministic depth-first order.
  void leaves(std::vector<int>* out) const;
  void subtree_leaves(int id, std::vector<int>* out) const;  // appends
  void nogs(std::vector<int>* out) const;       // internal, both children leaves
  void internals(std::vector<int>* out) const;
  int n_leaves() const;

  // Cut-index range [lo, hi] still available for var at a node, given the
  // rules on its ancestor path (the node's own rule excluded). Empty when
  // lo > hi.
  void cut_range(int id, int var, const CutGrid& grid, int* lo, int* hi) const;
  // Vars with a nonempty cut range at this node.
  void good_vars(int id, const CutGrid& grid, std::vector<int>* out) const;
  bool growable(int id, const CutGrid& grid) const;
  int n_growable_leaves(const CutGrid& grid) const;

  // Structural edits. grow turns a leaf into an internal node with two fresh
  // leaves; prune collapses a nog back to a leaf; change rewrites a split rule.
  void grow(int leaf, int var, int cut);
  void prune(int nog);
  void change(int id, int var, int cut);

  // True when every internal rule is consistent with its ancestors (no cell
  // empty on the grid) and every node's links are coherent.
  bool structure_valid(const CutGrid& grid) const;

 private:
  void collect(int id, bool want_leaf, bool want_nog, bool want_internal,
               std::vector<int>* out) const;
  int alloc_node();
  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
};

struct TreePriorConfig {
  double alpha = 0.95;  // depth prior: p_split(d) = alpha * (1+d)^-beta
  double beta = 2.0;
  double p_grow = 0.25, p_prune = 0.25, p_change = 0.5;
};

enum class MoveKind { Grow, Prune, Change };

struct TreeProposal {
  MoveKind kind = MoveKind::Grow;
  bool valid = false;   // false: no legal move of the drawn kind (auto-reject)
  int node = -1;        // leaf grown, nog pruned, or internal node changed
  int var = -1, cut = -1;
  Tree proposed;        // tree with the move applied
  double log_forward = 0.0;  // log q(proposed | current)
  double log_reverse = 0.0;  // log q(current | proposed)
};

// Log prior of the full tree: depth-prior terms at every node plus uniform
// rule probabilities (1/#good vars, 1/#available cuts) at internal nodes.
double log_tree_prior(const Tree& t, const CutGrid& grid, const TreePriorConfig& cfg);

// Draw a move kind from the configured mix (a stump can only Grow), then the
// move's ingredients uniformly from the legal candidates. Proposals that
// would violate grid consistency come back with valid=false.
TreeProposal propose_tree_move(const Tree& t, const CutGrid& grid,
                               const TreePriorConfig& cfg, Rng& rng);

}  // namespace abcf
