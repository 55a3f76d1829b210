#pragma once

// Pseudo-arclength continuation of the one-dimensional solution manifold of
// an augmented system. A sweep runs the branch in both directions from the
// initial point, adapts the step size to corrector performance, stores
// charts at a fixed interval, and detects three kinds of events between
// consecutive charts:
//
//  * EP   a released label reaches its computational-window boundary
//         (terminates the direction),
//  * FP   the branch folds with respect to the primary released label
//         (sign change of that tangent component),
//  * user a monitored label crosses a requested value.
//
// FP and user events are localized by a secant iteration on the step
// fraction and stored bracketed by the neighboring plain charts.

#include "conadj/newton.hpp"

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace conadj {

struct UserEvent {
  std::string name;
  std::string label;
  double value = 0.0;
};

struct ContinuationSettings {
  double h0 = 0.1;
  double h_min = 1e-5;
  double h_max = 0.5;
  int it_mx = 100;      // maximum continuation steps per direction
  int npr = 100;        // store every npr-th accepted chart
  double ev_tol = 1e-8; // localization tolerance on the event function
  CorrectorSettings corrector;
  std::vector<UserEvent> events;
  std::ostream* log = nullptr;  // progress table, when given
};

struct RunStore {
  std::vector<std::string> released;
  std::map<std::string, std::pair<double, double>> windows;
  std::vector<UserEvent> events;
  std::vector<Chart> charts;  // in emission order; labels strictly increasing

  const Chart& by_label(int label) const {
    for (const Chart& c : charts)
      if (c.label == label) return c;
    throw IoError("no chart with label " + std::to_string(label));
  }
  const Chart& first_of_type(const std::string& tag) const {
    for (const Chart& c : charts)
      if (c.type_tag == tag) return c;
    throw IoError("no chart of type '" + tag + "'");
  }
};

namespace detail {

inline void log_corrector(std::ostream* os, const CorrectResult& cr) {
  if (!os) return;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%6s%13s%13s%13s\n", "STEP", "||d||", "||f||", "||U||");
  *os << buf;
  for (const IterRecord& r : cr.history) {
    if (r.iter == 0)
      std::snprintf(buf, sizeof(buf), "%6d%13s%13.2e%13.2e\n", r.iter, "",
                    r.norm_f, r.norm_U);
    else
      std::snprintf(buf, sizeof(buf), "%6d%13.2e%13.2e%13.2e\n", r.iter, r.norm_d,
                    r.norm_f, r.norm_U);
    *os << buf;
  }
}

inline void log_chart(std::ostream* os, const AugmentedSystem& sys, const Chart& c,
                      const std::vector<std::string>& released) {
  if (!os) return;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%6d  %-6s", c.label, c.type_tag.c_str());
  *os << buf;
  for (const auto& lbl : released) {
    std::snprintf(buf, sizeof(buf), "  %11.4e", sys.value(c, lbl));
    *os << buf;
  }
  *os << "\n";
}

}  // namespace detail

class Continuation {
 public:
  Continuation(const AugmentedSystem& sys, ActiveSet active, ContinuationSettings cfg)
      : sys_(sys), active_(std::move(active)), cfg_(std::move(cfg)) {
    released_ = sys_.resolve(active_.released);
    for (const auto& [lbl, w] : active_.windows) {
      if (std::find(active_.released.begin(), active_.released.end(), lbl) ==
          active_.released.end())
        throw ProblemError("window on non-released label '" + lbl + "'");
      if (w.first >= w.second)
        throw ProblemError("empty window on label '" + lbl + "'");
    }
  }

  /// Run both directions from `start`. The start point is corrected first
  /// (free border); each direction then sweeps until an EP or it_mx.
  RunStore run(const Chart& start) {
    RunStore store;
    store.released = active_.released;
    store.windows = active_.windows;
    store.events = cfg_.events;

    CorrectResult cr0 = correct(sys_, start, released_, cfg_.corrector);
    detail::log_corrector(cfg_.log, cr0);
    if (!cr0.converged)
      throw SolveError("continuation: corrector failed at the initial point");
    Chart c0 = cr0.chart;

    Vec t0 = orient_first(cr0.tangent);
    next_label_ = 1;
    for (int dir = 0; dir < 2; ++dir) {
      const Vec t = (dir == 0) ? t0 : Vec(-t0);
      if (exits_window_at_boundary(c0, t)) continue;  // skipped, nothing emitted
      sweep(store, c0, t);
    }
    return store;
  }

 private:
  int rel_col(int k) const { return sys_.n_u() + sys_.n_lambda() + k; }

  /// Orientation of the very first tangent: positive component on the first
  /// released label with a non-negligible component.
  Vec orient_first(const Vec& t) const {
    for (size_t k = 0; k < released_.size(); ++k) {
      const double comp = t[rel_col(static_cast<int>(k))];
      if (std::abs(comp) > 1e-8) return comp > 0.0 ? t : Vec(-t);
    }
    return t;
  }

  /// True when the chart sits on a window boundary and the tangent points
  /// out of the window there.
  bool exits_window_at_boundary(const Chart& c, const Vec& t) const {
    for (size_t k = 0; k < active_.released.size(); ++k) {
      auto it = active_.windows.find(active_.released[k]);
      if (it == active_.windows.end()) continue;
      const double v = sys_.value(c, active_.released[k]);
      const double comp = t[rel_col(static_cast<int>(k))];
      const double scale = std::max(1.0, std::max(std::abs(it->second.first),
                                                  std::abs(it->second.second)));
      if (std::abs(v - it->second.first) <= 1e-8 * scale && comp < 0.0) return true;
      if (std::abs(v - it->second.second) <= 1e-8 * scale && comp > 0.0) return true;
    }
    return false;
  }

  /// Predictor from (c, t) with step h: scale the tangent so its released
  /// subvector has unit norm, then correct with the unit tangent as border.
  CorrectResult step(const Chart& c, const Vec& t, double h) const {
    Vec rel(released_.size());
    for (size_t k = 0; k < released_.size(); ++k)
      rel[static_cast<Eigen::Index>(k)] = t[rel_col(static_cast<int>(k))];
    const double rn = rel.norm();
    if (rn == 0.0) throw SolveError("continuation: tangent has no released component");
    Vec x = sys_.pack(c, released_) + (h / rn) * t;
    Chart pred = c;
    sys_.unpack(x, released_, pred);
    return correct(sys_, pred, released_, cfg_.corrector, t);
  }

  void emit(RunStore& store, Chart c, const std::string& tag) {
    c.label = next_label_++;
    c.type_tag = tag;
    store.charts.push_back(std::move(c));
    detail::log_chart(cfg_.log, sys_, store.charts.back(), active_.released);
  }

  /// Value of the scalar event function at a chart produced by a fractional
  /// step; used by the secant localization.
  using EventFn = std::function<double(const Chart&, const Vec& tangent)>;

  /// Secant / regula-falsi on the step fraction s in (0,1] between c0 and
  /// the chart at full step h. g0 = g(s=0), g1 = g(s=1) must straddle zero.
  bool localize(const Chart& c0, const Vec& t, double h, const EventFn& g,
                double g0, double g1, Chart& out) const {
    double a = 0.0, b = 1.0, ga = g0, gb = g1;
    Chart best;
    for (int it = 0; it < 60; ++it) {
      double s = (gb - ga != 0.0) ? a - ga * (b - a) / (gb - ga) : 0.5 * (a + b);
      s = std::min(std::max(s, a + 1e-12), b - 1e-12);
      CorrectResult cr = step(c0, t, s * h);
      if (!cr.converged) return false;
      const double gs = g(cr.chart, cr.tangent);
      best = cr.chart;
      if (std::abs(gs) <= cfg_.ev_tol) {
        out = best;
        return true;
      }
      if ((gs > 0.0) == (gb > 0.0)) {
        b = s;
        gb = gs;
      } else {
        a = s;
        ga = gs;
      }
    }
    out = best;
    return std::abs(gb - ga) <= cfg_.ev_tol;  // interval collapsed
  }

  static bool same_point(const Chart& a, const Chart& b) {
    return (a.u - b.u).squaredNorm() == 0.0 && (a.mu - b.mu).squaredNorm() == 0.0;
  }

  void sweep(RunStore& store, const Chart& start, const Vec& t_start) {
    Chart c = start;
    Vec t = t_start;
    pending_bracket_ = false;
    emit(store, c, "EP");
    size_t last_emitted = store.charts.size() - 1;

    double h = cfg_.h0;
    int since_store = 0;
    const int primary = 0;  // fold detection uses the first released label

    for (int it = 0; it < cfg_.it_mx; ++it) {
      CorrectResult cr;
      bool ok = false;
      while (true) {
        cr = step(c, t, h);
        if (cr.converged) {
          ok = true;
          break;
        }
        h *= 0.5;
        if (h < cfg_.h_min) break;
      }
      if (!ok) {
        // cannot proceed: close the direction at the last accepted chart
        if (!same_point(store.charts[last_emitted], c)) emit(store, c, "EP");
        return;
      }
      detail::log_corrector(cfg_.log, cr);

      Chart c1 = cr.chart;
      Vec t1 = cr.tangent;
      if (t1.dot(t) < 0.0) t1 = -t1;
      c1.tangent = t1;
      c1.step_h = h;

      // fold: tangent component on the primary released label changes sign;
      // a noise floor keeps an identically-constant label from chattering
      const double tc0 = t[rel_col(primary)];
      const double tc1 = t1[rel_col(primary)];
      if (std::max(std::abs(tc0), std::abs(tc1)) > 1e-6 && tc0 != 0.0 && tc1 != 0.0 &&
          (tc0 > 0.0) != (tc1 > 0.0)) {
        Chart fp;
        EventFn g = [&](const Chart&, const Vec& tg) {
          Vec tt = tg;
          if (tt.dot(t) < 0.0) tt = -tt;
          return tt[rel_col(primary)];
        };
        if (localize(c, t, h, g, tc0, tc1, fp)) {
          bracket_emit(store, last_emitted, c, fp, "FP");
        }
      }

      // user events: monitored label crosses the requested value
      for (const UserEvent& ev : cfg_.events) {
        const double g0 = sys_.value(c, ev.label) - ev.value;
        const double g1 = sys_.value(c1, ev.label) - ev.value;
        if (g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0)) continue;
        Chart uc;
        EventFn g = [&](const Chart& ch, const Vec&) {
          return sys_.value(ch, ev.label) - ev.value;
        };
        if (localize(c, t, h, g, g0, g1, uc))
          bracket_emit(store, last_emitted, c, uc, ev.name);
      }

      // window boundary: localize the endpoint and stop this direction
      for (size_t k = 0; k < active_.released.size(); ++k) {
        auto wit = active_.windows.find(active_.released[k]);
        if (wit == active_.windows.end()) continue;
        const double v1 = sys_.value(c1, active_.released[k]);
        for (double bound : {wit->second.first, wit->second.second}) {
          const double g0 = sys_.value(c, active_.released[k]) - bound;
          const double g1 = v1 - bound;
          if (g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0)) continue;
          Chart ep;
          const std::string lbl = active_.released[k];
          EventFn g = [&](const Chart& ch, const Vec&) {
            return sys_.value(ch, lbl) - bound;
          };
          if (!localize(c, t, h, g, g0, g1, ep)) ep = c1;
          emit(store, ep, "EP");
          return;
        }
      }

      c = c1;
      t = t1;
      ++since_store;
      if (pending_bracket_ || since_store >= cfg_.npr) {
        emit(store, c, "plain");
        last_emitted = store.charts.size() - 1;
        since_store = 0;
        pending_bracket_ = false;
      }
      if (static_cast<int>(cr.history.size()) - 1 <= 3) h = std::min(2.0 * h, cfg_.h_max);
    }

    // step budget exhausted: close the direction here
    if (!same_point(store.charts[last_emitted], c)) emit(store, c, "EP");
  }

  /// Store an interior event bracketed by plain neighbors: the chart before
  /// it (unless already stored last) and, on the next emission opportunity,
  /// the chart after it.
  void bracket_emit(RunStore& store, size_t& last_emitted, const Chart& before,
                    const Chart& event_chart, const std::string& tag) {
    if (!same_point(store.charts[last_emitted], before)) emit(store, before, "plain");
    emit(store, event_chart, tag);
    last_emitted = store.charts.size() - 1;
    pending_bracket_ = true;
  }

  const AugmentedSystem& sys_;
  ActiveSet active_;
  ContinuationSettings cfg_;
  std::vector<Slot> released_;
  int next_label_ = 1;
  bool pending_bracket_ = false;
};

}  // namespace conadj
