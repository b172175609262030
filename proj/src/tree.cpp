#include "tree.hpp"

#include <algorithm>
#include <cmath>

namespace abcf {

CutGrid CutGrid::from_data(const double* x, int n, int p, int n_cuts) {
  CutGrid grid;
  grid.cuts.resize(p);
  for (int v = 0; v < p; ++v) {
    double lo = x[v], hi = x[v];
    for (int j = 1; j < n; ++j) {
      double xv = x[static_cast<std::size_t>(j) * p + v];
      lo = std::min(lo, xv);
      hi = std::max(hi, xv);
    }
    if (!(hi > lo)) continue;  // constant covariate: never split
    grid.cuts[v].reserve(n_cuts);
    for (int i = 0; i < n_cuts; ++i)
      grid.cuts[v].push_back(lo + (hi - lo) * (i + 1) / (n_cuts + 1));
  }
  return grid;
}

Tree::Tree() { nodes_.emplace_back(); }

int Tree::depth(int id) const {
  int d = 0;
  while (nodes_[id].parent >= 0) {
    id = nodes_[id].parent;
    ++d;
  }
  return d;
}

int Tree::leaf_index_from(int start, const double* row, const CutGrid& grid) const {
  int id = start;
  while (!nodes_[id].is_leaf()) {
    const TreeNode& nd = nodes_[id];
    id = row[nd.var] < grid.cuts[nd.var][nd.cut] ? nd.left : nd.right;
  }
  return id;
}

void Tree::collect(int id, bool want_leaf, bool want_nog, bool want_internal,
                   std::vector<int>* out) const {
  const TreeNode& nd = nodes_[id];
  if (nd.is_leaf()) {
    if (want_leaf) out->push_back(id);
    return;
  }
  bool nog = nodes_[nd.left].is_leaf() && nodes_[nd.right].is_leaf();
  if (want_internal || (want_nog && nog)) out->push_back(id);
  collect(nd.left, want_leaf, want_nog, want_internal, out);
  collect(nd.right, want_leaf, want_nog, want_internal, out);
}

void Tree::leaves(std::vector<int>* out) const {
  out->clear();
  collect(0, true, false, false, out);
}

void Tree::subtree_leaves(int id, std::vector<int>* out) const {
  collect(id, true, false, false, out);
}

void Tree::nogs(std::vector<int>* out) const {
  out->clear();
  collect(0, false, true, false, out);
}

void Tree::internals(std::vector<int>* out) const {
  out->clear();
  collect(0, false, false, true, out);
}

int Tree::n_leaves() const {
  std::vector<int> tmp;
  leaves(&tmp);
  return static_cast<int>(tmp.size());
}

void Tree::cut_range(int id, int var, const CutGrid& grid, int* lo, int* hi) const {
  *lo = 0;
  *hi = grid.n_cuts(var) - 1;
  int child = id;
  int cur = nodes_[id].parent;
  while (cur >= 0) {
    const TreeNode& nd = nodes_[cur];
    if (nd.var == var) {
      if (child == nd.left)
        *hi = std::min(*hi, nd.cut - 1);
      else
        *lo = std::max(*lo, nd.cut + 1);
    }
    child = cur;
    cur = nd.parent;
  }
}

void Tree::good_vars(int id, const CutGrid& grid, std::vector<int>* out) const {
  out->clear();
  for (int v = 0; v < grid.n_vars(); ++v) {
    int lo, hi;
    cut_range(id, v, grid, &lo, &hi);
    if (lo <= hi) out->push_back(v);
  }
}

bool Tree::growable(int id, const CutGrid& grid) const {
  for (int v = 0; v < grid.n_vars(); ++v) {
    int lo, hi;
    cut_range(id, v, grid, &lo, &hi);
    if (lo <= hi) return true;
  }
  return false;
}

int Tree::n_growable_leaves(const CutGrid& grid) const {
  std::vector<int> ls;
  leaves(&ls);
  int count = 0;
  for (int id : ls)
    if (growable(id, grid)) ++count;
  return count;
}

int Tree::alloc_node() {
  if (!free_.empty()) {
    int id = free_.back();
    free_.pop_back();
    nodes_[id] = TreeNode{};
    return id;
  }
  nodes_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

void Tree::grow(int leaf, int var, int cut) {
  int l = alloc_node();
  int r = alloc_node();
  nodes_[l].parent = leaf;
  nodes_[r].parent = leaf;
  TreeNode& nd = nodes_[leaf];
  nd.left = l;
  nd.right = r;
  nd.var = var;
  nd.cut = cut;
  nd.leaf = 0.0;
}

void Tree::prune(int nog) {
  TreeNode& nd = nodes_[nog];
  free_.push_back(nd.left);
  free_.push_back(nd.right);
  nd.left = nd.right = -1;
  nd.var = nd.cut = -1;
  nd.leaf = 0.0;
}

void Tree::change(int id, int var, int cut) {
  nodes_[id].var = var;
  nodes_[id].cut = cut;
}

bool Tree::structure_valid(const CutGrid& grid) const {
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const TreeNode& nd = nodes_[id];
    if (nd.is_leaf()) {
      if (!std::isfinite(nd.leaf)) return false;
      if (nd.right >= 0) return false;  // half-linked
      continue;
    }
    if (nd.left < 0 || nd.right < 0) return false;
    if (nodes_[nd.left].parent != id || nodes_[nd.right].parent != id) return false;
    if (nd.var < 0 || nd.var >= grid.n_vars()) return false;
    int lo, hi;
    cut_range(id, nd.var, grid, &lo, &hi);
    if (nd.cut < lo || nd.cut > hi) return false;
    stack.push_back(nd.left);
    stack.push_back(nd.right);
  }
  return true;
}

static double p_split(const TreePriorConfig& cfg, int depth) {
  return cfg.alpha * std::pow(1.0 + depth, -cfg.beta);
}

double log_tree_prior(const Tree& t, const CutGrid& grid, const TreePriorConfig& cfg) {
  double lp = 0.0;
  std::vector<int> stack{t.root()};
  std::vector<int> gv;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const TreeNode& nd = t.node(id);
    double ps = p_split(cfg, t.depth(id));
    if (nd.is_leaf()) {
      // A node with no splittable variable left is a leaf with certainty.
      if (t.growable(id, grid)) lp += std::log1p(-ps);
      continue;
    }
    t.good_vars(id, grid, &gv);
    int lo, hi;
    t.cut_range(id, nd.var, grid, &lo, &hi);
    lp += std::log(ps) - std::log(static_cast<double>(gv.size())) -
          std::log(static_cast<double>(hi - lo + 1));
    stack.push_back(nd.left);
    stack.push_back(nd.right);
  }
  return lp;
}

TreeProposal propose_tree_move(const Tree& t, const CutGrid& grid,
                               const TreePriorConfig& cfg, Rng& rng) {
  TreeProposal prop;
  const bool stump = t.is_stump();
  const double pg = stump ? 1.0 : cfg.p_grow;
  const double pp = stump ? 0.0 : cfg.p_prune;
  double u = rng.uniform();
  if (u < pg)
    prop.kind = MoveKind::Grow;
  else if (u < pg + pp)
    prop.kind = MoveKind::Prune;
  else
    prop.kind = MoveKind::Change;

  std::vector<int> pool, gv;
  if (prop.kind == MoveKind::Grow) {
    t.leaves(&pool);
    std::vector<int> growable;
    for (int id : pool)
      if (t.growable(id, grid)) growable.push_back(id);
    if (growable.empty()) return prop;  // nothing splittable anywhere
    prop.node = growable[rng.below(growable.size())];
    t.good_vars(prop.node, grid, &gv);
    prop.var = gv[rng.below(gv.size())];
    int lo, hi;
    t.cut_range(prop.node, prop.var, grid, &lo, &hi);
    prop.cut = lo + static_cast<int>(rng.below(hi - lo + 1));
    prop.proposed = t;
    prop.proposed.grow(prop.node, prop.var, prop.cut);
    prop.log_forward = std::log(pg) - std::log(static_cast<double>(growable.size())) -
                       std::log(static_cast<double>(gv.size())) -
                       std::log(static_cast<double>(hi - lo + 1));
    prop.proposed.nogs(&pool);
    prop.log_reverse =
        std::log(cfg.p_prune) - std::log(static_cast<double>(pool.size()));
    prop.valid = true;
  } else if (prop.kind == MoveKind::Prune) {
    t.nogs(&pool);
    prop.node = pool[rng.below(pool.size())];
    const TreeNode& nd = t.node(prop.node);
    const int old_var = nd.var, old_cut = nd.cut;
    prop.proposed = t;
    prop.proposed.prune(prop.node);
    prop.log_forward = std::log(pp) - std::log(static_cast<double>(pool.size()));
    // Reverse: grow back the same rule from the pruned tree.
    double rg = prop.proposed.is_stump() ? 1.0 : cfg.p_grow;
    int n_grow = prop.proposed.n_growable_leaves(grid);
    prop.proposed.good_vars(prop.node, grid, &gv);
    int lo, hi;
    prop.proposed.cut_range(prop.node, old_var, grid, &lo, &hi);
    (void)old_cut;
    prop.log_reverse = std::log(rg) - std::log(static_cast<double>(n_grow)) -
                       std::log(static_cast<double>(gv.size())) -
                       std::log(static_cast<double>(hi - lo + 1));
    prop.valid = true;
  } else {
    t.internals(&pool);
    prop.node = pool[rng.below(pool.size())];
    const int old_var = t.node(prop.node).var;
    t.good_vars(prop.node, grid, &gv);
    prop.var = gv[rng.below(gv.size())];
    int lo, hi;
    t.cut_range(prop.node, prop.var, grid, &lo, &hi);
    prop.cut = lo + static_cast<int>(rng.below(hi - lo + 1));
    prop.proposed = t;
    prop.proposed.change(prop.node, prop.var, prop.cut);
    // A rewritten rule can strand a descendant's rule outside its range.
    if (!prop.proposed.structure_valid(grid)) return prop;
    int rlo, rhi;
    t.cut_range(prop.node, old_var, grid, &rlo, &rhi);
    double shared = std::log(1.0 - pg - pp) - std::log(static_cast<double>(pool.size())) -
                    std::log(static_cast<double>(gv.size()));
    prop.log_forward = shared - std::log(static_cast<double>(hi - lo + 1));
    prop.log_reverse = shared - std::log(static_cast<double>(rhi - rlo + 1));
    prop.valid = true;
  }
  return prop;
}

}  // namespace abcf
