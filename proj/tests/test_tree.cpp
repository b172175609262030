#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rng.hpp"
#include "tree.hpp"

using namespace abcf;

namespace {

// Two covariates on [0, 1] with a 10-point uniform grid each.
CutGrid rich_grid() {
  std::vector<double> x;
  int n = 50;
  for (int j = 0; j < n; ++j) {
    x.push_back(j / (n - 1.0));
    x.push_back(1.0 - j / (n - 1.0));
  }
  return CutGrid::from_data(x.data(), n, 2, 10);
}

// Random valid tree built through the public edit API.
Tree random_tree(const CutGrid& grid, int n_grows, std::mt19937& gen) {
  Tree t;
  for (int i = 0; i < n_grows; ++i) {
    std::vector<int> leaves, growable, gv;
    t.leaves(&leaves);
    for (int id : leaves)
      if (t.growable(id, grid)) growable.push_back(id);
    if (growable.empty()) break;
    int node = growable[gen() % growable.size()];
    t.good_vars(node, grid, &gv);
    int var = gv[gen() % gv.size()];
    int lo, hi;
    t.cut_range(node, var, grid, &lo, &hi);
    int cut = lo + static_cast<int>(gen() % (hi - lo + 1));
    t.grow(node, var, cut);
  }
  return t;
}

double p_split(const TreePriorConfig& cfg, int depth) {
  return cfg.alpha * std::pow(1.0 + depth, -cfg.beta);
}

// Independent recursive recomputation of the tree log prior.
double prior_oracle(const Tree& t, int id, const CutGrid& grid,
                    const TreePriorConfig& cfg) {
  const TreeNode& nd = t.node(id);
  double ps = p_split(cfg, t.depth(id));
  if (nd.is_leaf())
    return t.growable(id, grid) ? std::log1p(-ps) : 0.0;
  std::vector<int> gv;
  t.good_vars(id, grid, &gv);
  int lo, hi;
  t.cut_range(id, nd.var, grid, &lo, &hi);
  return std::log(ps) - std::log(double(gv.size())) - std::log(double(hi - lo + 1)) +
         prior_oracle(t, nd.left, grid, cfg) + prior_oracle(t, nd.right, grid, cfg);
}

int count_growable(const Tree& t, const CutGrid& grid) {
  std::vector<int> leaves;
  t.leaves(&leaves);
  int c = 0;
  for (int id : leaves)
    if (t.growable(id, grid)) ++c;
  return c;
}

// From-scratch recomputation of a proposal's forward/reverse log densities
// using only the trees and the public inspection API.
void proposal_oracle(const Tree& before, const TreeProposal& prop, const CutGrid& grid,
                     const TreePriorConfig& cfg, double* fwd, double* rev) {
  std::vector<int> tmp, gv;
  const double pg = before.is_stump() ? 1.0 : cfg.p_grow;
  const double pp = before.is_stump() ? 0.0 : cfg.p_prune;
  if (prop.kind == MoveKind::Grow) {
    before.good_vars(prop.node, grid, &gv);
    int lo, hi;
    before.cut_range(prop.node, prop.var, grid, &lo, &hi);
    *fwd = std::log(pg) - std::log(double(count_growable(before, grid))) -
           std::log(double(gv.size())) - std::log(double(hi - lo + 1));
    prop.proposed.nogs(&tmp);
    *rev = std::log(cfg.p_prune) - std::log(double(tmp.size()));
  } else if (prop.kind == MoveKind::Prune) {
    before.nogs(&tmp);
    *fwd = std::log(pp) - std::log(double(tmp.size()));
    const Tree& after = prop.proposed;
    double rg = after.is_stump() ? 1.0 : cfg.p_grow;
    after.good_vars(prop.node, grid, &gv);
    int lo, hi;
    after.cut_range(prop.node, before.node(prop.node).var, grid, &lo, &hi);
    *rev = std::log(rg) - std::log(double(count_growable(after, grid))) -
           std::log(double(gv.size())) - std::log(double(hi - lo + 1));
  } else {
    before.internals(&tmp);
    before.good_vars(prop.node, grid, &gv);
    int lo, hi, rlo, rhi;
    before.cut_range(prop.node, prop.var, grid, &lo, &hi);
    before.cut_range(prop.node, before.node(prop.node).var, grid, &rlo, &rhi);
    double shared = std::log(1.0 - pg - pp) - std::log(double(tmp.size())) -
                    std::log(double(gv.size()));
    *fwd = shared - std::log(double(hi - lo + 1));
    *rev = shared - std::log(double(rhi - rlo + 1));
  }
}

}  // namespace

TEST_CASE("cut grid is uniform and interior") {
  std::vector<double> x{0.0, 1.0, 0.5, 0.25};  // one covariate
  CutGrid g = CutGrid::from_data(x.data(), 4, 1, 4);
  REQUIRE(g.n_vars() == 1);
  REQUIRE(g.n_cuts(0) == 4);
  CHECK(g.cuts[0][0] == doctest::Approx(0.2));
  CHECK(g.cuts[0][1] == doctest::Approx(0.4));
  CHECK(g.cuts[0][2] == doctest::Approx(0.6));
  CHECK(g.cuts[0][3] == doctest::Approx(0.8));

  // Constant covariate gets no cutpoints and is never offered for splitting.
  std::vector<double> xc{3.0, 3.0, 3.0};
  CutGrid gc = CutGrid::from_data(xc.data(), 3, 1, 4);
  CHECK(gc.n_cuts(0) == 0);
  Tree t;
  CHECK_FALSE(t.growable(0, gc));
  std::vector<int> gv;
  t.good_vars(0, gc, &gv);
  CHECK(gv.empty());
}

TEST_CASE("structural edits and involution") {
  CutGrid grid = rich_grid();
  Tree t;
  CHECK(t.is_stump());
  CHECK(t.n_leaves() == 1);

  t.grow(0, 0, 4);
  CHECK_FALSE(t.is_stump());
  CHECK(t.n_leaves() == 2);
  CHECK(t.structure_valid(grid));
  CHECK(t.depth(t.node(0).left) == 1);

  int left = t.node(0).left;
  t.grow(left, 1, 2);
  CHECK(t.n_leaves() == 3);
  CHECK(t.structure_valid(grid));

  // Grow followed by the exactly-inverse prune restores the original tree.
  std::mt19937 gen(11);
  for (int rep = 0; rep < 50; ++rep) {
    Tree base = random_tree(grid, 1 + int(gen() % 6), gen);
    std::vector<int> leaves, growable;
    base.leaves(&leaves);
    for (int id : leaves)
      if (base.growable(id, grid)) growable.push_back(id);
    if (growable.empty()) continue;
    int node = growable[gen() % growable.size()];
    std::vector<int> gv;
    base.good_vars(node, grid, &gv);
    int var = gv[gen() % gv.size()];
    int lo, hi;
    base.cut_range(node, var, grid, &lo, &hi);

    Tree edited = base;
    edited.grow(node, var, lo);
    edited.prune(node);
    // Identical partition of the design and identical leaf count.
    CHECK(edited.n_leaves() == base.n_leaves());
    for (int j = 0; j < 50; ++j) {
      const double row[2] = {j / 49.0, 1.0 - j / 49.0};
      CHECK(edited.leaf_index(row, grid) == base.leaf_index(row, grid));
    }
    CHECK(edited.structure_valid(grid));
  }
}

TEST_CASE("leaf walk follows split rules") {
  CutGrid grid = rich_grid();
  Tree t;
  t.grow(0, 0, 4);  // split on x0 at grid.cuts[0][4]
  double c = grid.cuts[0][4];
  const double below[2] = {c - 1e-6, 0.5};
  const double above[2] = {c, 0.5};  // boundary goes right (left is strict <)
  CHECK(t.leaf_index(below, grid) == t.node(0).left);
  CHECK(t.leaf_index(above, grid) == t.node(0).right);
}

TEST_CASE("cut ranges narrow along the ancestor path") {
  CutGrid grid = rich_grid();
  Tree t;
  t.grow(0, 0, 5);
  int left = t.node(0).left, right = t.node(0).right;
  int lo, hi;
  t.cut_range(left, 0, grid, &lo, &hi);
  CHECK(lo == 0);
  CHECK(hi == 4);
  t.cut_range(right, 0, grid, &lo, &hi);
  CHECK(lo == 6);
  CHECK(hi == 9);
  // The other covariate is unrestricted on both sides.
  t.cut_range(left, 1, grid, &lo, &hi);
  CHECK(lo == 0);
  CHECK(hi == 9);

  // Exhausting a variable removes it from good_vars.
  Tree t2;
  std::vector<double> x{0.0, 1.0};
  CutGrid g1 = CutGrid::from_data(x.data(), 2, 1, 1);  // single cut
  t2.grow(0, 0, 0);
  std::vector<int> gv;
  t2.good_vars(t2.node(0).left, g1, &gv);
  CHECK(gv.empty());
  CHECK_FALSE(t2.growable(t2.node(0).left, g1));
}

TEST_CASE("tree log prior matches an independent recursion") {
  CutGrid grid = rich_grid();
  TreePriorConfig cfg;  // defaults alpha .95 beta 2

  Tree stump;
  CHECK(log_tree_prior(stump, grid, cfg) == doctest::Approx(std::log(0.05)).epsilon(1e-12));

  std::mt19937 gen(3);
  for (int rep = 0; rep < 40; ++rep) {
    Tree t = random_tree(grid, int(gen() % 8), gen);
    for (double alpha : {0.95, 0.25}) {
      for (double beta : {2.0, 3.0}) {
        TreePriorConfig c;
        c.alpha = alpha;
        c.beta = beta;
        CHECK(log_tree_prior(t, grid, c) ==
              doctest::Approx(prior_oracle(t, 0, grid, c)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("stump receives only grow proposals") {
  CutGrid grid = rich_grid();
  TreePriorConfig cfg;
  Rng rng(1);
  Tree stump;
  for (int i = 0; i < 200; ++i) {
    TreeProposal p = propose_tree_move(stump, grid, cfg, rng);
    CHECK(p.kind == MoveKind::Grow);
    CHECK(p.valid);
    CHECK(p.proposed.n_leaves() == 2);
  }
  // A stump on an unsplittable grid has no legal move at all.
  std::vector<double> xc{3.0, 3.0};
  CutGrid gc = CutGrid::from_data(xc.data(), 2, 1, 5);
  TreeProposal p = propose_tree_move(stump, gc, cfg, rng);
  CHECK_FALSE(p.valid);
}

TEST_CASE("move mix frequencies on a deep tree") {
  CutGrid grid = rich_grid();
  TreePriorConfig cfg;
  std::mt19937 gen(17);
  Tree t = random_tree(grid, 7, gen);
  REQUIRE(t.n_leaves() >= 4);

  Rng rng(99);
  int counts[3] = {0, 0, 0};
  int n = 10000;
  for (int i = 0; i < n; ++i) {
    TreeProposal p = propose_tree_move(t, grid, cfg, rng);
    ++counts[static_cast<int>(p.kind)];
  }
  CHECK(std::abs(counts[0] / double(n) - 0.25) < 0.02);
  CHECK(std::abs(counts[1] / double(n) - 0.25) < 0.02);
  CHECK(std::abs(counts[2] / double(n) - 0.50) < 0.02);
}

TEST_CASE("proposal log densities match a from-scratch recomputation") {
  CutGrid grid = rich_grid();
  TreePriorConfig cfg;
  std::mt19937 gen(23);
  Rng rng(7);
  int checked[3] = {0, 0, 0};
  for (int rep = 0; rep < 400; ++rep) {
    Tree t = random_tree(grid, int(gen() % 7), gen);
    TreeProposal p = propose_tree_move(t, grid, cfg, rng);
    if (!p.valid) continue;
    CHECK(p.proposed.structure_valid(grid));
    double fwd, rev;
    proposal_oracle(t, p, grid, cfg, &fwd, &rev);
    CHECK(p.log_forward == doctest::Approx(fwd).epsilon(1e-12));
    CHECK(p.log_reverse == doctest::Approx(rev).epsilon(1e-12));
    ++checked[static_cast<int>(p.kind)];
  }
  // All three kinds exercised.
  CHECK(checked[0] > 20);
  CHECK(checked[1] > 20);
  CHECK(checked[2] > 20);
}

TEST_CASE("change proposals that strand a descendant are invalid") {
  std::vector<double> x{0.0, 0.3, 0.6, 1.0};
  CutGrid grid = CutGrid::from_data(x.data(), 4, 1, 3);  // cuts .25 .5 .75
  Tree t;
  t.grow(0, 0, 1);                 // root at cut index 1
  t.grow(t.node(0).left, 0, 0);    // left child at cut index 0
  REQUIRE(t.structure_valid(grid));

  // Forcing the root's rule down to index 0 leaves the left child's rule with
  // an empty range; the proposal machinery must flag that case invalid.
  Rng rng(5);
  TreePriorConfig cfg;
  bool saw_invalid_change = false;
  for (int i = 0; i < 2000 && !saw_invalid_change; ++i) {
    TreeProposal p = propose_tree_move(t, grid, cfg, rng);
    if (p.kind != MoveKind::Change || p.valid) continue;
    saw_invalid_change = true;
    CHECK_FALSE(p.proposed.structure_valid(grid));
  }
  CHECK(saw_invalid_change);

  Tree broken = t;
  broken.change(0, 0, 0);
  CHECK_FALSE(broken.structure_valid(grid));
}
