#include "forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace abcf {

static constexpr double kLog2Pi = 1.8378770664093454836;
static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double leaf_log_marginal_core(const LeafSuff& s, double leaf_scale) {
  const double A = 1.0 / (leaf_scale * leaf_scale);
  return 0.5 * std::log(A / (A + s.Lambda)) + s.S * s.S / (2.0 * (A + s.Lambda));
}

double leaf_log_marginal(std::span<const double> r, std::span<const double> lambda,
                         double leaf_scale) {
  LeafSuff s;
  double c = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    s.Lambda += lambda[j];
    s.S += lambda[j] * r[j];
    c += 0.5 * (std::log(lambda[j]) - kLog2Pi) - 0.5 * lambda[j] * r[j] * r[j];
  }
  return leaf_log_marginal_core(s, leaf_scale) + c;
}

ForestData ForestData::build(const double* x, int n, int p, int n_cutpoints) {
  ForestData fd;
  fd.n = n;
  fd.p = p;
  fd.x.assign(x, x + static_cast<std::size_t>(n) * p);
  fd.grid = CutGrid::from_data(fd.x.data(), n, p, n_cutpoints);
  return fd;
}

void Forest::init(int n_trees, int n_units, double scale, const TreePriorConfig& cfg) {
  trees.assign(n_trees, Tree());
  leaf_of.assign(n_trees, std::vector<int>(n_units, 0));
  fits.assign(n_trees, std::vector<double>(n_units, 0.0));
  total.assign(n_units, 0.0);
  leaf_scale = scale;
  prior = cfg;
  move_attempts = move_accepts = 0;
}

void Forest::refresh_total() {
  std::fill(total.begin(), total.end(), 0.0);
  for (const auto& f : fits)
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += f[j];
}

double Forest::evaluate(const ForestData& fd, const double* row) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.leaf_value(t.leaf_index(row, fd.grid));
  return s;
}

namespace {

// Workspace reused across trees within one sweep.
struct Sweep {
  std::vector<double> pr;          // per-unit partial-residual numerator
  std::vector<LeafSuff> suff;      // node-id indexed, current tree
  std::vector<int> leaf_ids;       // scratch
  std::vector<int> moved_units;    // units whose leaf changes if accepted
  std::vector<int> moved_leaf;     // their new leaf ids
  std::vector<LeafSuff> suff_new;  // node-id indexed stats for new leaves
  std::vector<char> in_subtree;    // node-id indexed membership flags
};

}  // namespace

void update_forest(Forest& f, const ForestData& fd, std::span<const double> num,
                   std::span<const double> a, std::span<const double> lambda,
                   Rng& rng, std::vector<MoveRecord>* move_log) {
  const int n = fd.n;
  Sweep ws;
  ws.pr.resize(n);

  for (std::size_t k = 0; k < f.trees.size(); ++k) {
    Tree& tree = f.trees[k];
    std::vector<int>& leaf_of = f.leaf_of[k];
    std::vector<double>& fit = f.fits[k];

    // Partial residual: the full numerator minus every other tree's
    // contribution (this tree's own fit enters through coefficient a_j).
    for (int j = 0; j < n; ++j)
      ws.pr[j] = num[j] - a[j] * (f.total[j] - fit[j]);

    ws.suff.assign(tree.id_bound(), LeafSuff{});
    for (int j = 0; j < n; ++j) {
      LeafSuff& s = ws.suff[leaf_of[j]];
      const double al = a[j] * lambda[j];
      s.Lambda += a[j] * al;
      s.S += al * ws.pr[j];
      s.count += 1;
    }

    TreeProposal prop = propose_tree_move(tree, fd.grid, f.prior, rng);
    f.move_attempts += 1;
    bool accepted = false;
    double log_accept = kNegInf;
    ws.moved_units.clear();
    ws.moved_leaf.clear();

    if (prop.valid) {
      double delta_marg = 0.0;
      bool empty_leaf = false;
      const int bound = std::max(tree.id_bound(), prop.proposed.id_bound());
      ws.suff_new.assign(bound, LeafSuff{});

      if (prop.kind == MoveKind::Grow) {
        const int L = prop.node;
        const int cl = prop.proposed.node(L).left, cr = prop.proposed.node(L).right;
        const double cut_val = fd.grid.cuts[prop.var][prop.cut];
        for (int j = 0; j < n; ++j) {
          if (leaf_of[j] != L) continue;
          int dest = fd.row(j)[prop.var] < cut_val ? cl : cr;
          ws.moved_units.push_back(j);
          ws.moved_leaf.push_back(dest);
          LeafSuff& s = ws.suff_new[dest];
          const double al = a[j] * lambda[j];
          s.Lambda += a[j] * al;
          s.S += al * ws.pr[j];
          s.count += 1;
        }
        empty_leaf = ws.suff_new[cl].count == 0 || ws.suff_new[cr].count == 0;
        delta_marg = leaf_log_marginal_core(ws.suff_new[cl], f.leaf_scale) +
                     leaf_log_marginal_core(ws.suff_new[cr], f.leaf_scale) -
                     leaf_log_marginal_core(ws.suff[L], f.leaf_scale);
      } else if (prop.kind == MoveKind::Prune) {
        const int N = prop.node;
        const int cl = tree.node(N).left, cr = tree.node(N).right;
        LeafSuff merged;
        merged.Lambda = ws.suff[cl].Lambda + ws.suff[cr].Lambda;
        merged.S = ws.suff[cl].S + ws.suff[cr].S;
        merged.count = ws.suff[cl].count + ws.suff[cr].count;
        ws.suff_new[N] = merged;
        for (int j = 0; j < n; ++j) {
          if (leaf_of[j] != cl && leaf_of[j] != cr) continue;
          ws.moved_units.push_back(j);
          ws.moved_leaf.push_back(N);
        }
        delta_marg = leaf_log_marginal_core(merged, f.leaf_scale) -
                     leaf_log_marginal_core(ws.suff[cl], f.leaf_scale) -
                     leaf_log_marginal_core(ws.suff[cr], f.leaf_scale);
      } else {  // Change: re-route every unit inside the rewritten subtree
        const int M = prop.node;
        ws.leaf_ids.clear();
        tree.subtree_leaves(M, &ws.leaf_ids);
        ws.in_subtree.assign(tree.id_bound(), 0);
        double old_marg = 0.0;
        for (int id : ws.leaf_ids) {
          ws.in_subtree[id] = 1;
          old_marg += leaf_log_marginal_core(ws.suff[id], f.leaf_scale);
        }
        for (int j = 0; j < n; ++j) {
          if (!ws.in_subtree[leaf_of[j]]) continue;
          int dest = prop.proposed.leaf_index_from(M, fd.row(j), fd.grid);
          ws.moved_units.push_back(j);
          ws.moved_leaf.push_back(dest);
          LeafSuff& s = ws.suff_new[dest];
          const double al = a[j] * lambda[j];
          s.Lambda += a[j] * al;
          s.S += al * ws.pr[j];
          s.count += 1;
        }
        double new_marg = 0.0;
        ws.leaf_ids.clear();
        prop.proposed.subtree_leaves(M, &ws.leaf_ids);
        for (int id : ws.leaf_ids) {
          if (ws.suff_new[id].count == 0) empty_leaf = true;
          new_marg += leaf_log_marginal_core(ws.suff_new[id], f.leaf_scale);
        }
        delta_marg = new_marg - old_marg;
      }

      if (!empty_leaf) {
        double delta_prior = log_tree_prior(prop.proposed, fd.grid, f.prior) -
                             log_tree_prior(tree, fd.grid, f.prior);
        log_accept = delta_prior + delta_marg + prop.log_reverse - prop.log_forward;
        accepted = std::log(rng.uniform_pos()) < log_accept;
      }
    }

    if (move_log) {
      MoveRecord rec;
      rec.before = tree;
      rec.proposal = prop;
      rec.log_accept = log_accept;
      rec.accepted = accepted;
      move_log->push_back(std::move(rec));
    }

    if (accepted) {
      f.move_accepts += 1;
      // Patch the cached stats and assignments to the accepted structure.
      if (ws.suff.size() < ws.suff_new.size()) ws.suff.resize(ws.suff_new.size());
      if (prop.kind == MoveKind::Grow) {
        const int L = prop.node;
        ws.suff[prop.proposed.node(L).left] = ws.suff_new[prop.proposed.node(L).left];
        ws.suff[prop.proposed.node(L).right] = ws.suff_new[prop.proposed.node(L).right];
        ws.suff[L] = LeafSuff{};
      } else if (prop.kind == MoveKind::Prune) {
        ws.suff[tree.node(prop.node).left] = LeafSuff{};
        ws.suff[tree.node(prop.node).right] = LeafSuff{};
        ws.suff[prop.node] = ws.suff_new[prop.node];
      } else {
        ws.leaf_ids.clear();
        tree.subtree_leaves(prop.node, &ws.leaf_ids);
        for (int id : ws.leaf_ids) ws.suff[id] = LeafSuff{};
        ws.leaf_ids.clear();
        prop.proposed.subtree_leaves(prop.node, &ws.leaf_ids);
        for (int id : ws.leaf_ids) ws.suff[id] = ws.suff_new[id];
      }
      for (std::size_t i = 0; i < ws.moved_units.size(); ++i)
        leaf_of[ws.moved_units[i]] = ws.moved_leaf[i];
      tree = std::move(prop.proposed);
    }

    // Redraw every leaf value from its conjugate posterior, deterministic
    // depth-first order.
    tree.leaves(&ws.leaf_ids);
    const double A = 1.0 / (f.leaf_scale * f.leaf_scale);
    for (int id : ws.leaf_ids) {
      const LeafSuff& s = ws.suff[id];
      double prec = A + s.Lambda;
      tree.set_leaf_value(id, s.S / prec + rng.normal() / std::sqrt(prec));
    }
    for (int j = 0; j < n; ++j) {
      double nv = tree.leaf_value(leaf_of[j]);
      f.total[j] += nv - fit[j];
      fit[j] = nv;
    }
  }
  f.refresh_total();
}

void b_conditional(std::span<const double> num, std::span<const double> g,
                   std::span<const double> lambda, double prior_sd, double* mean,
                   double* var) {
  double prec = 1.0 / (prior_sd * prior_sd);
  double s = 0.0;
  for (std::size_t j = 0; j < num.size(); ++j) {
    prec += g[j] * g[j] * lambda[j];
    s += g[j] * lambda[j] * num[j];
  }
  *var = 1.0 / prec;
  *mean = s / prec;
}

}  // namespace abcf
