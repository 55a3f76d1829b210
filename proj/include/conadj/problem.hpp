#pragma once

// Staged construction of the extended continuation problem
//
//   Phi(u) = 0,  Psi(u) - mu = 0,  (DPhi(u))^T lambda + (DPsi(u))^T eta = 0
//
// from zero/monitor blocks with shared index bookkeeping, plus assembly of
// the residual and its Jacobian. Adjoint rows are keyed by u-index: adjoint
// row j collects the coefficient of the variation delta u_j, so the adjoint
// row indices of a block coincide with its uidx.

#include "conadj/numdiff.hpp"
#include "conadj/types.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace conadj {

enum class BlockKind { Zero, Monitor };

/// One variable slot of a block: either a fresh variable appended to u
/// (with an initial value) or a reuse of an existing index.
struct Var {
  bool is_fresh = false;
  double init = 0.0;
  int index = -1;

  static Var fresh(double v) {
    Var r;
    r.is_fresh = true;
    r.init = v;
    return r;
  }
  static Var reuse(int idx) {
    Var r;
    r.index = idx;
    return r;
  }
};

struct Block {
  std::string name;
  BlockKind kind = BlockKind::Zero;
  int dim_out = 0;
  std::vector<int> uidx;
  std::vector<bool> fresh_mask;  // which slots were appended by this block
  EvalFn eval;
  JacFn jac;  // empty -> central FD fallback on eval

  // monitor blocks only
  std::vector<std::string> labels;
  int mu_offset = -1;

  // adjoint registration (at most one per block)
  bool has_adjoint = false;
  int adj_offset = -1;  // into lambda (zero blocks) or eta (monitor blocks)
  std::vector<std::string> comp_labels;
  Vec adj_l0;

  Vec gather(const Vec& u) const {
    Vec loc(uidx.size());
    for (size_t k = 0; k < uidx.size(); ++k) loc[static_cast<int>(k)] = u[uidx[k]];
    return loc;
  }

  Vec eval_at(const Vec& uloc) const {
    Vec f = eval(uloc);
    if (f.size() != dim_out)
      throw EvalError(name, "residual dimension changed between evaluations");
    if (!f.allFinite()) throw EvalError(name, "residual evaluation returned NaN/Inf");
    return f;
  }

  Mat jac_at(const Vec& uloc) const {
    Mat J = jac ? jac(uloc) : fd_jacobian(eval, uloc);
    if (J.rows() != dim_out || J.cols() != static_cast<Eigen::Index>(uidx.size()))
      throw EvalError(name, "Jacobian has inconsistent dimensions");
    if (!J.allFinite()) throw EvalError(name, "Jacobian evaluation returned NaN/Inf");
    return J;
  }
};

/// Address of a trackable value: a continuation parameter (mu) or a
/// complementary parameter (eta component).
struct Slot {
  enum Kind { Mu, Eta } kind = Mu;
  int index = -1;
};

/// One solution point of the augmented problem.
struct Chart {
  Vec u;
  Vec mu;   // all continuation parameters, in registration order
  Vec lam;  // adjoint variables of zero blocks
  Vec eta;  // adjoint variables of monitor blocks (complementary parameters)

  Vec tangent;  // unit kernel vector in the active unknown layout; may be empty
  int label = 0;
  std::string type_tag = "plain";  // "EP", "FP", user event name, or "plain"
  double norm_d = 0.0, norm_f = 0.0, norm_U = 0.0;
  double step_h = 0.0;  // predictor step size that produced this chart

  double norm_U_value() const {
    return std::sqrt(u.squaredNorm() + lam.squaredNorm() + eta.squaredNorm());
  }
};

/// Runtime choice of released labels and computational-domain windows.
struct ActiveSet {
  std::vector<std::string> released;
  std::map<std::string, std::pair<double, double>> windows;
};

class AugmentedSystem;

class ProblemBuilder {
 public:
  std::vector<int> add_zero_block(const std::string& name, EvalFn eval, JacFn jac,
                                  const std::vector<Var>& vars) {
    return add_block(name, BlockKind::Zero, std::move(eval), std::move(jac), vars, {});
  }

  /// All-fresh convenience: variables appended and initialized from u0.
  std::vector<int> add_zero_block(const std::string& name, EvalFn eval, JacFn jac,
                                  const Vec& u0) {
    return add_zero_block(name, std::move(eval), std::move(jac), all_fresh(u0));
  }

  /// All-reuse convenience.
  std::vector<int> add_zero_block(const std::string& name, EvalFn eval, JacFn jac,
                                  const std::vector<int>& uidx) {
    return add_zero_block(name, std::move(eval), std::move(jac), all_reuse(uidx));
  }

  void add_monitor_block(const std::string& name, EvalFn eval, JacFn jac,
                         const std::vector<std::string>& labels,
                         const std::vector<int>& uidx) {
    add_block(name, BlockKind::Monitor, std::move(eval), std::move(jac),
              all_reuse(uidx), labels);
  }

  /// Monitor block whose eval is the identity on the selected indices.
  void add_parameters(const std::string& name, const std::vector<int>& uidx,
                      const std::vector<std::string>& labels) {
    if (uidx.empty()) throw ProblemError("add_parameters '" + name + "': empty index list");
    if (uidx.size() != labels.size())
      throw ProblemError("add_parameters '" + name + "': index/label count mismatch");
    const int n = static_cast<int>(uidx.size());
    add_monitor_block(
        name, [](const Vec& x) { return x; },
        [n](const Vec&) { return Mat(Mat::Identity(n, n)); }, labels, uidx);
  }

  /// Zero block with residual u[uidx1] - u[uidx2].
  void add_glue(const std::string& name, const std::vector<int>& uidx1,
                const std::vector<int>& uidx2) {
    if (uidx1.size() != uidx2.size())
      throw ProblemError("add_glue '" + name + "': index list length mismatch");
    if (uidx1 == uidx2)
      std::cerr << "[conadj] warning: degenerate glue block '" << name
                << "' (identical index lists, residual identically zero)\n";
    const int n = static_cast<int>(uidx1.size());
    std::vector<int> uidx(uidx1);
    uidx.insert(uidx.end(), uidx2.begin(), uidx2.end());
    add_zero_block(
        name,
        [n](const Vec& x) { return Vec(x.head(n) - x.tail(n)); },
        [n](const Vec&) {
          Mat J(n, 2 * n);
          J << Mat::Identity(n, n), -Mat::Identity(n, n);
          return J;
        },
        uidx);
  }

  /// Registers the adjoint contribution (D_block)^T lambda_block. Returns the
  /// adjoint row indices of the block, which equal its uidx. For monitor
  /// blocks the new adjoint variables are eta components exposed under
  /// comp_labels; l0 provides initial values (default zero). aidx, when
  /// given, must list the adjoint rows of the block's reused variables in
  /// the block's variable order (a readback-consistency check).
  std::vector<int> add_adjoint(const std::string& name,
                               const std::vector<std::string>& comp_labels = {},
                               const std::vector<int>& aidx = {},
                               const Vec& l0 = Vec()) {
    auto it = block_index_.find(name);
    if (it == block_index_.end())
      throw ProblemError("add_adjoint: no block named '" + name + "'");
    Block& bl = blocks_[it->second];
    if (bl.has_adjoint)
      throw ProblemError("add_adjoint: block '" + name + "' already has an adjoint");

    if (!aidx.empty()) {
      std::vector<int> reused;
      for (size_t k = 0; k < bl.uidx.size(); ++k)
        if (!bl.fresh_mask[k]) reused.push_back(bl.uidx[k]);
      if (aidx != reused)
        throw ProblemError("add_adjoint '" + name +
                           "': aidx does not match the adjoint rows of the "
                           "block's reused variables");
    }

    int n_adj;
    if (bl.kind == BlockKind::Zero) {
      n_adj = bl.dim_out;
      if (!comp_labels.empty())
        throw ProblemError("add_adjoint '" + name +
                           "': complementary labels only apply to monitor blocks");
      bl.adj_offset = n_lambda_;
      n_lambda_ += n_adj;
    } else {
      n_adj = static_cast<int>(bl.labels.size());
      if (static_cast<int>(comp_labels.size()) != n_adj)
        throw ProblemError("add_adjoint '" + name +
                           "': one complementary label per monitor row required");
      for (const auto& lbl : comp_labels) register_label(lbl);
      bl.comp_labels = comp_labels;
      bl.adj_offset = n_eta_;
      n_eta_ += n_adj;
      comp_labels_.insert(comp_labels_.end(), comp_labels.begin(), comp_labels.end());
    }
    if (l0.size() != 0 && l0.size() != n_adj)
      throw ProblemError("add_adjoint '" + name + "': l0 has wrong length");
    bl.adj_l0 = (l0.size() != 0) ? l0 : Vec(Vec::Zero(n_adj));
    bl.has_adjoint = true;
    return bl.uidx;
  }

  int n_u() const { return static_cast<int>(u0_.size()); }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }

  AugmentedSystem assemble() const;

 private:
  friend class AugmentedSystem;

  static std::vector<Var> all_fresh(const Vec& u0) {
    std::vector<Var> vars;
    vars.reserve(static_cast<size_t>(u0.size()));
    for (int k = 0; k < u0.size(); ++k) vars.push_back(Var::fresh(u0[k]));
    return vars;
  }
  static std::vector<Var> all_reuse(const std::vector<int>& uidx) {
    std::vector<Var> vars;
    vars.reserve(uidx.size());
    for (int idx : uidx) vars.push_back(Var::reuse(idx));
    return vars;
  }

  void register_label(const std::string& lbl) {
    if (!labels_seen_.insert(lbl).second)
      throw ProblemError("duplicate parameter label '" + lbl + "'");
  }

  std::vector<int> add_block(const std::string& name, BlockKind kind, EvalFn eval,
                             JacFn jac, const std::vector<Var>& vars,
                             const std::vector<std::string>& labels) {
    if (block_index_.count(name))
      throw ProblemError("duplicate block name '" + name + "'");
    if (vars.empty()) throw ProblemError("block '" + name + "' has no variables");

    Block bl;
    bl.name = name;
    bl.kind = kind;
    bl.eval = std::move(eval);
    bl.jac = std::move(jac);
    for (const Var& v : vars) {
      if (v.is_fresh) {
        bl.uidx.push_back(n_u());
        bl.fresh_mask.push_back(true);
        u0_.push_back(v.init);
      } else {
        if (v.index < 0 || v.index >= n_u())
          throw ProblemError("block '" + name + "': variable index out of range");
        bl.uidx.push_back(v.index);
        bl.fresh_mask.push_back(false);
      }
    }

    // Evaluate once at the initial point to fix dim_out (and catch errors early).
    Vec u(n_u());
    for (int k = 0; k < u.size(); ++k) u[k] = u0_[static_cast<size_t>(k)];
    Vec loc = bl.gather(u);
    Vec f0 = bl.eval(loc);
    if (!f0.allFinite())
      throw EvalError(name, "residual evaluation at the initial point returned NaN/Inf");
    bl.dim_out = static_cast<int>(f0.size());

    if (kind == BlockKind::Monitor) {
      if (labels.empty() || static_cast<int>(labels.size()) != bl.dim_out)
        throw ProblemError("monitor block '" + name +
                           "': one label per monitor row required");
      for (const auto& lbl : labels) register_label(lbl);
      bl.labels = labels;
      bl.mu_offset = n_mu_;
      n_mu_ += bl.dim_out;
      mu_labels_.insert(mu_labels_.end(), labels.begin(), labels.end());
      // mu initialized to Psi(u) at registration
      for (int k = 0; k < bl.dim_out; ++k) mu0_.push_back(f0[k]);
    } else {
      n_zero_rows_ += bl.dim_out;
    }

    std::vector<int> out = bl.uidx;
    block_index_[name] = blocks_.size();
    blocks_.push_back(std::move(bl));
    return out;
  }

  std::vector<Block> blocks_;
  std::map<std::string, size_t> block_index_;
  std::set<std::string> labels_seen_;
  std::vector<double> u0_;
  std::vector<double> mu0_;
  std::vector<std::string> mu_labels_;
  std::vector<std::string> comp_labels_;
  int n_zero_rows_ = 0;
  int n_mu_ = 0;
  int n_lambda_ = 0;
  int n_eta_ = 0;
};

/// Immutable assembled problem. Residual layout:
///   [zero blocks in registration order; Psi(u)-mu; adjoint rows by u-index]
/// The adjoint segment is present only if at least one adjoint was added.
/// Unknown layout for corrector/continuation: [u; lambda; released values].
class AugmentedSystem {
 public:
  explicit AugmentedSystem(const ProblemBuilder& pb)
      : blocks_(pb.blocks_),
        mu_labels_(pb.mu_labels_),
        comp_labels_(pb.comp_labels_),
        n_u_(pb.n_u()),
        n_zero_rows_(pb.n_zero_rows_),
        n_mu_(pb.n_mu_),
        n_lambda_(pb.n_lambda_),
        n_eta_(pb.n_eta_) {
    for (const Block& bl : blocks_)
      if (bl.has_adjoint) has_adjoint_ = true;
    u0_ = Eigen::Map<const Vec>(pb.u0_.data(), static_cast<Eigen::Index>(pb.u0_.size()));
    mu0_ = Eigen::Map<const Vec>(pb.mu0_.data(), static_cast<Eigen::Index>(pb.mu0_.size()));
    lam0_ = Vec::Zero(n_lambda_);
    eta0_ = Vec::Zero(n_eta_);
    for (const Block& bl : blocks_) {
      if (!bl.has_adjoint) continue;
      if (bl.kind == BlockKind::Zero)
        lam0_.segment(bl.adj_offset, bl.adj_l0.size()) = bl.adj_l0;
      else
        eta0_.segment(bl.adj_offset, bl.adj_l0.size()) = bl.adj_l0;
    }
    for (int k = 0; k < static_cast<int>(mu_labels_.size()); ++k)
      slots_[mu_labels_[static_cast<size_t>(k)]] = Slot{Slot::Mu, k};
    for (int k = 0; k < static_cast<int>(comp_labels_.size()); ++k)
      slots_[comp_labels_[static_cast<size_t>(k)]] = Slot{Slot::Eta, k};
  }

  int n_u() const { return n_u_; }
  int n_mu() const { return n_mu_; }
  int n_lambda() const { return n_lambda_; }
  int n_eta() const { return n_eta_; }
  bool has_adjoint() const { return has_adjoint_; }
  int residual_dim() const { return n_zero_rows_ + n_mu_ + (has_adjoint_ ? n_u_ : 0); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::string>& mu_labels() const { return mu_labels_; }
  const std::vector<std::string>& comp_labels() const { return comp_labels_; }

  const Block& block(const std::string& name) const {
    for (const Block& bl : blocks_)
      if (bl.name == name) return bl;
    throw ProblemError("unknown block '" + name + "'");
  }

  Slot slot(const std::string& label) const {
    auto it = slots_.find(label);
    if (it == slots_.end()) throw ProblemError("unknown parameter label '" + label + "'");
    return it->second;
  }

  double value(const Chart& c, const std::string& label) const {
    const Slot s = slot(label);
    return s.kind == Slot::Mu ? c.mu[s.index] : c.eta[s.index];
  }

  Chart initial_chart() const {
    Chart c;
    c.u = u0_;
    c.mu = mu0_;
    c.lam = lam0_;
    c.eta = eta0_;
    return c;
  }

  /// Adjoint variables of one block (lambda for zero blocks, eta for
  /// monitor blocks), sliced from a chart.
  Vec block_adjoint(const Chart& c, const std::string& name) const {
    const Block& bl = block(name);
    if (!bl.has_adjoint) throw ProblemError("block '" + name + "' has no adjoint");
    const int n = (bl.kind == BlockKind::Zero) ? bl.dim_out
                                               : static_cast<int>(bl.labels.size());
    return (bl.kind == BlockKind::Zero) ? Vec(c.lam.segment(bl.adj_offset, n))
                                        : Vec(c.eta.segment(bl.adj_offset, n));
  }

  Vec residual(const Vec& u, const Vec& mu, const Vec& lam, const Vec& eta) const {
    check_dims(u, mu, lam, eta);
    Vec r = Vec::Zero(residual_dim());
    int zrow = 0;
    for (const Block& bl : blocks_) {
      const Vec loc = bl.gather(u);
      if (bl.kind == BlockKind::Zero) {
        r.segment(zrow, bl.dim_out) = bl.eval_at(loc);
        zrow += bl.dim_out;
      } else {
        r.segment(n_zero_rows_ + bl.mu_offset, bl.dim_out) =
            bl.eval_at(loc) - mu.segment(bl.mu_offset, bl.dim_out);
      }
    }
    if (has_adjoint_) {
      auto adj = r.segment(n_zero_rows_ + n_mu_, n_u_);
      for (const Block& bl : blocks_) {
        if (!bl.has_adjoint) continue;
        const Vec a = (bl.kind == BlockKind::Zero)
                          ? Vec(lam.segment(bl.adj_offset, bl.dim_out))
                          : Vec(eta.segment(bl.adj_offset, bl.dim_out));
        if (a.isZero(0.0)) continue;
        const Vec contrib = bl.jac_at(bl.gather(u)).transpose() * a;
        for (size_t k = 0; k < bl.uidx.size(); ++k)
          adj[bl.uidx[k]] += contrib[static_cast<Eigen::Index>(k)];
      }
    }
    return r;
  }

  Vec residual(const Chart& c) const { return residual(c.u, c.mu, c.lam, c.eta); }

  /// Sparse Jacobian of the residual with respect to the unknown layout
  /// [u (n_u) | lambda (n_lambda) | released values (one column per label)].
  /// Fixed mu/eta entries are constants and get no column. The second
  /// derivative terms in the adjoint rows use directional central FD of the
  /// block Jacobians; everything else is analytic (or the block FD fallback).
  std::vector<Triplet> jacobian_triplets(const Vec& u, const Vec& mu, const Vec& lam,
                                         const Vec& eta,
                                         const std::vector<Slot>& released) const {
    check_dims(u, mu, lam, eta);
    std::vector<Triplet> trip;
    const int rel_col0 = n_u_ + n_lambda_;
    // released eta index -> column (for adjoint d/d eta entries)
    std::map<int, int> eta_col;
    for (size_t k = 0; k < released.size(); ++k)
      if (released[k].kind == Slot::Eta)
        eta_col[released[k].index] = rel_col0 + static_cast<int>(k);

    const double h2 = fd_step(u.size() ? u.cwiseAbs().maxCoeff() : 1.0);

    int zrow = 0;
    const int arow0 = n_zero_rows_ + n_mu_;
    for (const Block& bl : blocks_) {
      const Vec loc = bl.gather(u);
      const Mat J = bl.jac_at(loc);
      const int row0 =
          (bl.kind == BlockKind::Zero) ? zrow : n_zero_rows_ + bl.mu_offset;
      if (bl.kind == BlockKind::Zero) zrow += bl.dim_out;
      for (int r = 0; r < bl.dim_out; ++r)
        for (size_t k = 0; k < bl.uidx.size(); ++k)
          if (J(r, static_cast<Eigen::Index>(k)) != 0.0)
            trip.emplace_back(row0 + r, bl.uidx[k], J(r, static_cast<Eigen::Index>(k)));

      if (bl.kind == BlockKind::Monitor) {
        // d(Psi - mu)/d mu = -1 on released entries
        for (size_t k = 0; k < released.size(); ++k) {
          const Slot& s = released[k];
          if (s.kind == Slot::Mu && s.index >= bl.mu_offset &&
              s.index < bl.mu_offset + bl.dim_out)
            trip.emplace_back(n_zero_rows_ + s.index, rel_col0 + static_cast<int>(k),
                              -1.0);
        }
      }

      if (!has_adjoint_ || !bl.has_adjoint) continue;

      // d(adjoint rows)/d(adjoint variables) = J^T, exactly
      for (int r = 0; r < bl.dim_out; ++r) {
        int col = -1;
        if (bl.kind == BlockKind::Zero) {
          col = n_u_ + bl.adj_offset + r;
        } else {
          auto it = eta_col.find(bl.adj_offset + r);
          if (it == eta_col.end()) continue;  // fixed eta: constant, no column
          col = it->second;
        }
        for (size_t k = 0; k < bl.uidx.size(); ++k)
          if (J(r, static_cast<Eigen::Index>(k)) != 0.0)
            trip.emplace_back(arow0 + bl.uidx[k], col, J(r, static_cast<Eigen::Index>(k)));
      }

      // d(adjoint rows)/du = (D^2 block)^T a  by directional central FD of jac
      const Vec a = (bl.kind == BlockKind::Zero)
                        ? Vec(lam.segment(bl.adj_offset, bl.dim_out))
                        : Vec(eta.segment(bl.adj_offset, bl.dim_out));
      if (!a.isZero(0.0)) {
        Vec up = loc, dn = loc;
        for (size_t k = 0; k < bl.uidx.size(); ++k) {
          const auto ki = static_cast<Eigen::Index>(k);
          up[ki] = loc[ki] + h2;
          dn[ki] = loc[ki] - h2;
          const Vec dcol = ((bl.jac_at(up) - bl.jac_at(dn)).transpose() * a) / (2.0 * h2);
          up[ki] = loc[ki];
          dn[ki] = loc[ki];
          for (size_t j = 0; j < bl.uidx.size(); ++j)
            if (dcol[static_cast<Eigen::Index>(j)] != 0.0)
              trip.emplace_back(arow0 + bl.uidx[j], bl.uidx[k],
                                dcol[static_cast<Eigen::Index>(j)]);
        }
      }
    }
    return trip;
  }

  std::vector<Slot> resolve(const std::vector<std::string>& labels) const {
    std::vector<Slot> out;
    out.reserve(labels.size());
    for (const auto& lbl : labels) out.push_back(slot(lbl));
    return out;
  }

  int n_unknowns(const std::vector<Slot>& released) const {
    return n_u_ + n_lambda_ + static_cast<int>(released.size());
  }

  Vec pack(const Chart& c, const std::vector<Slot>& released) const {
    Vec x(n_unknowns(released));
    x.head(n_u_) = c.u;
    x.segment(n_u_, n_lambda_) = c.lam;
    for (size_t k = 0; k < released.size(); ++k) {
      const Slot& s = released[k];
      x[n_u_ + n_lambda_ + static_cast<int>(k)] =
          s.kind == Slot::Mu ? c.mu[s.index] : c.eta[s.index];
    }
    return x;
  }

  void unpack(const Vec& x, const std::vector<Slot>& released, Chart& c) const {
    c.u = x.head(n_u_);
    c.lam = x.segment(n_u_, n_lambda_);
    for (size_t k = 0; k < released.size(); ++k) {
      const Slot& s = released[k];
      const double v = x[n_u_ + n_lambda_ + static_cast<int>(k)];
      if (s.kind == Slot::Mu)
        c.mu[s.index] = v;
      else
        c.eta[s.index] = v;
    }
  }

 private:
  void check_dims(const Vec& u, const Vec& mu, const Vec& lam, const Vec& eta) const {
    if (u.size() != n_u_ || mu.size() != n_mu_ || lam.size() != n_lambda_ ||
        eta.size() != n_eta_)
      throw ProblemError("assemble: state dimensions do not match the problem");
  }

  std::vector<Block> blocks_;
  std::vector<std::string> mu_labels_;
  std::vector<std::string> comp_labels_;
  std::map<std::string, Slot> slots_;
  Vec u0_, mu0_, lam0_, eta0_;
  int n_u_ = 0, n_zero_rows_ = 0, n_mu_ = 0, n_lambda_ = 0, n_eta_ = 0;
  bool has_adjoint_ = false;
};

inline AugmentedSystem ProblemBuilder::assemble() const { return AugmentedSystem(*this); }

}  // namespace conadj
