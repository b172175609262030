#pragma once

#include <span>
#include <vector>

#include "rng.hpp"
#include "tree.hpp"

namespace abcf {

// Sufficient statistics of one leaf under the working model
// num_j ~ N(a_j * m, 1/lambda_j), m ~ N(0, leaf_scale^2):
//   Lambda = sum a_j^2 lambda_j, S = sum a_j lambda_j num_j.
// The prognostic forest uses a_j = 1; the treatment forest uses a_j = b_{z_j},
// so controls inform tau only through the b0 scale. The per-unit constants
// sum to the same value for every tree shape (each unit lands in exactly one
// leaf) and are dropped on the hot path.
struct LeafSuff {
  double Lambda = 0.0, S = 0.0;
  int count = 0;
};

// Move-dependent part of the leaf's log marginal likelihood:
//   0.5 log(A / (A + Lambda)) + S^2 / (2 (A + Lambda)),  A = 1/leaf_scale^2.
double leaf_log_marginal_core(const LeafSuff& s, double leaf_scale);

// Full log marginal integral, constants included:
// log Int prod_j N(r_j | m, 1/lambda_j) N(m | 0, leaf_scale^2) dm.
// Empty spans return 0 (just the prior's own normalization).
double leaf_log_marginal(std::span<const double> r, std::span<const double> lambda,
                         double leaf_scale);

// Design matrix a tree ensemble splits on (the prognostic ensemble appends
// the propensity as an extra column).
struct ForestData {
  int n = 0, p = 0;
  std::vector<double> x;  // row-major n-by-p
  CutGrid grid;

  const double* row(int j) const { return x.data() + static_cast<std::size_t>(j) * p; }
  static ForestData build(const double* x, int n, int p, int n_cutpoints);
};

// One ensemble with cached unit-to-leaf assignments and fits, so a sweep
// never re-walks units that a move does not touch.
struct Forest {
  std::vector<Tree> trees;
  std::vector<std::vector<int>> leaf_of;  // [tree][unit] leaf node id
  std::vector<std::vector<double>> fits;  // [tree][unit] raw leaf values
  std::vector<double> total;              // per-unit sum over trees
  double leaf_scale = 1.0;
  TreePriorConfig prior;
  long move_attempts = 0, move_accepts = 0;

  void init(int n_trees, int n_units, double scale, const TreePriorConfig& cfg);
  // Recompute total from per-tree fits (kills incremental-update drift).
  void refresh_total();
  // Fresh walk of every tree at the given row; cache-consistency oracle.
  double evaluate(const ForestData& fd, const double* row) const;
};

// Everything logged about one MH tree move, for replaying the accept ratio
// from scratch in tests.
struct MoveRecord {
  Tree before;
  TreeProposal proposal;
  double log_accept = 0.0;
  bool accepted = false;
};

// One backfitting sweep: for each tree, remove its fit from the target,
// propose Grow/Prune/Change, accept by Metropolis-Hastings with tree-prior x
// marginal-likelihood x transition ratio, then redraw all leaf values from
// their conjugate normal posteriors N(S/(A+Lambda), 1/(A+Lambda)). Proposals
// that would leave any leaf without units are rejected outright.
void update_forest(Forest& f, const ForestData& fd, std::span<const double> num,
                   std::span<const double> a, std::span<const double> lambda,
                   Rng& rng, std::vector<MoveRecord>* move_log = nullptr);

// Conjugate N(mean, var) for a treatment-arm scale b with prior N(0, prior_sd^2)
// and likelihood num_j ~ N(b * g_j, 1/lambda_j) over the arm's units.
void b_conditional(std::span<const double> num, std::span<const double> g,
                   std::span<const double> lambda, double prior_sd, double* mean,
                   double* var);

}  // namespace abcf
