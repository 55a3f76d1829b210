// Command-line front end: demo runs, spectral/phase diagnostics of the
// invariant-curve problem, and quick verification suites.
//
// Exit codes: 0 success, 1 runtime/verification failure, 2 usage error.

#include "conadj/corpus.hpp"
#include "conadj/hybrid.hpp"
#include "conadj/invariant_curve.hpp"
#include "conadj/io.hpp"
#include "conadj/numdiff.hpp"
#include "conadj/osc.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace conadj;

namespace {

std::string default_root() {
  if (const char* env = std::getenv("CONADJ_RUN_ROOT")) return env;
  return "runs";
}

struct Common {
  std::string dir = default_root();
  double tol = -1.0;  // negative = keep the subcommand default
  int itmx = -1;
  int npr = -1;
  double h0 = -1.0;
  double hmax = -1.0;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--dir", c.dir, "run directory root")->capture_default_str();
  cmd->add_option("--tol", c.tol, "corrector tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--itmx", c.itmx, "maximum continuation steps per direction")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--npr", c.npr, "store every npr-th accepted chart")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--h0", c.h0, "initial step size")->check(CLI::PositiveNumber);
  cmd->add_option("--hmax", c.hmax, "maximum step size")->check(CLI::PositiveNumber);
  cmd->add_option("--format", c.format, "export file format")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
}

std::function<void(ContinuationSettings&)> make_tweak(const Common& c) {
  return [c](ContinuationSettings& cfg) {
    if (c.tol > 0) cfg.corrector.tol = c.tol;
    if (c.itmx > 0) cfg.it_mx = c.itmx;
    if (c.npr > 0) cfg.npr = c.npr;
    if (c.h0 > 0) cfg.h0 = c.h0;
    if (c.hmax > 0) cfg.h_max = c.hmax;
  };
}

/// Stored branch table re-printed from the run store (the same source the
/// branch.csv columns are written from).
void print_table(const AugmentedSystem& sys, const RunStore& store) {
  std::printf("\n%6s  %-6s", "LABEL", "TYPE");
  for (const auto& lbl : store.released) std::printf("  %11s", lbl.c_str());
  std::printf("\n");
  for (const Chart& c : store.charts) {
    std::printf("%6d  %-6s", c.label, c.type_tag.c_str());
    for (const auto& lbl : store.released) std::printf("  %11.4e", sys.value(c, lbl));
    std::printf("\n");
  }
}

/// Numeric table export, csv or jsonl depending on --format.
void write_rows(const fs::path& dir, const std::string& base, const std::string& format,
                const std::vector<std::string>& cols,
                const std::vector<std::vector<double>>& rows) {
  fs::create_directories(dir);
  const fs::path file = dir / (base + "." + format);
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file.string());
  if (format == "csv") {
    for (size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << "\n";
    char buf[32];
    for (const auto& row : rows) {
      for (size_t k = 0; k < row.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[k]);
        os << (k ? "," : "") << buf;
      }
      os << "\n";
    }
  } else {
    for (const auto& row : rows) {
      nlohmann::json j = nlohmann::json::object();
      for (size_t k = 0; k < row.size() && k < cols.size(); ++k) j[cols[k]] = row[k];
      os << j.dump() << "\n";
    }
  }
  std::printf("wrote %s (%zu rows)\n", file.string().c_str(), rows.size());
}

const Chart& pick_chart(const RunStore& store, const std::string& sel) {
  if (store.charts.empty()) throw IoError("run store is empty");
  if (sel == "first") return store.charts.front();
  if (sel == "last") return store.charts.back();
  try {
    size_t pos = 0;
    const int label = std::stoi(sel, &pos);
    if (pos == sel.size()) return store.by_label(label);
  } catch (const std::invalid_argument&) {
  }
  return store.first_of_type(sel);
}

/// Rebuild the curve problem and check it against a stored chart.
invc::CurveProblem curve_problem_for(const Chart& chart, int q, int p_rot) {
  invc::CurveProblem cp = invc::build_curve_problem(q, p_rot);
  if (chart.u.size() != cp.sys.n_u())
    throw ProblemError("stored chart does not match --q/--p-rot (expected " +
                       std::to_string(cp.sys.n_u()) + " unknowns, chart has " +
                       std::to_string(chart.u.size()) + ")");
  return cp;
}

// ---------------------------------------------------------------- commands

int cmd_osc_adjoint(const Common& c) {
  RunStore store = osc::run_first(c.dir, &std::cout, make_tweak(c));
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  print_table(sys, store);
  const Chart& end = osc::chart_nearest(store, sys, "e.da", 1.0);
  std::printf("\nendpoint (e.da = 1):  e.av=%11.4e  e.ep=%11.4e  e.ze=%11.4e\n",
              sys.value(end, "e.av"), sys.value(end, "e.ep"), sys.value(end, "e.ze"));
  return 0;
}

int cmd_osc_sweep(const Common& c) {
  if (!fs::exists(fs::path(c.dir) / "run1" / "meta.json")) {
    std::printf("no stored first run under %s, computing it\n", c.dir.c_str());
    osc::run_first(c.dir, nullptr, make_tweak(c));
  }
  RunStore store = osc::run_second(c.dir, &std::cout, make_tweak(c));
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  print_table(sys, store);
  std::printf("\nfold points of da along av:\n");
  for (const Chart& ch : store.charts)
    if (ch.type_tag == "FP")
      std::printf("%6d  FP      av=%11.4e  da=%11.4e  e.av=%11.4e\n", ch.label,
                  sys.value(ch, "av"), sys.value(ch, "da"), sys.value(ch, "e.av"));
  return 0;
}

int cmd_invc_continue(const Common& c, int q, int p_rot) {
  invc::CurveProblem cp = invc::build_curve_problem(q, p_rot);
  RunStore store = invc::run_curve_continuation(c.dir, cp, &std::cout, make_tweak(c));
  print_table(cp.sys, store);

  for (const Chart& ch : store.charts)
    if (ch.type_tag == "A")
      std::printf("\nevent row:  A  %11.4e  b=%11.4e  e.r2=%11.4e  e.b=%11.4e\n",
                  cp.sys.value(ch, "r2"), cp.sys.value(ch, "b"),
                  cp.sys.value(ch, "e.r2"), cp.sys.value(ch, "e.b"));

  // curve samples and fiber tangents at the event point (last chart if the
  // event was not crossed)
  const Chart* at = &store.charts.back();
  for (const Chart& ch : store.charts)
    if (ch.type_tag == "A") at = &ch;
  invc::CurveState cs = invc::extract_state(cp, *at);
  Mat qphi = invc::q_phi_limit(cp.map, cs);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < cs.q; ++i)
    rows.push_back({2 * M_PI * i / cs.q, cs.v(0, i), cs.v(1, i), qphi(0, i), qphi(1, i)});
  write_rows(fs::path(c.dir) / "curve", "curve", c.format,
             {"phi", "x1", "x2", "q1", "q2"}, rows);
  return 0;
}

int cmd_invc_spectrum(const Common& c, const std::string& mode, const std::string& label,
                      int q, int p_rot) {
  RunStore store = load_run(c.dir, "curve");
  const Chart& chart = pick_chart(store, label);
  invc::CurveProblem cp = curve_problem_for(chart, q, p_rot);
  invc::CurveState cs = invc::extract_state(cp, chart);
  Mat qphi = invc::q_phi_limit(cp.map, cs);

  if (mode == "radius") {
    const double radius = invc::gamma_hat_radius(cp.map, cs, qphi);
    std::printf("label %d (%s), r2=%11.4e: max|1+z| = %.6f (%s)\n", chart.label,
                chart.type_tag.c_str(), cp.sys.value(chart, "r2"), radius,
                radius < 1.0 ? "transversally stable" : "not transversally stable");
    return 0;
  }

  auto spec = invc::gamma_hat_spectrum_full(cp.map, cs, qphi);
  double radius = 0.0;
  std::vector<std::vector<double>> rows;
  for (const auto& z : spec) {
    radius = std::max(radius, std::abs(1.0 + z));
    rows.push_back({z.real(), z.imag()});
  }
  write_rows(fs::path(c.dir) / "curve", "spectrum", c.format, {"re", "im"}, rows);
  std::printf("label %d (%s), r2=%11.4e: %zu eigenvalues, max|1+z| = %.6f\n",
              chart.label, chart.type_tag.c_str(), cp.sys.value(chart, "r2"),
              spec.size(), radius);
  return 0;
}

int cmd_invc_phase(const Common& c, const std::string& label, int q, int p_rot,
                   double delta0, int k_max) {
  RunStore store = load_run(c.dir, "curve");
  const Chart& chart = pick_chart(store, label);
  invc::CurveProblem cp = curve_problem_for(chart, q, p_rot);
  invc::CurveState cs = invc::extract_state(cp, chart);
  Mat qphi = invc::q_phi_limit(cp.map, cs);

  const int trials = 20;
  std::vector<std::vector<double>> gaps;
  double worst_plateau = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double ang = 2 * M_PI * t / trials;
    const Vec2 d0 = delta0 * Vec2(std::cos(ang), std::sin(ang));
    const int i0 = (t * 37) % cs.q;
    gaps.push_back(invc::phase_decay_experiment(cp.map, cs, qphi, i0, d0, k_max));
    double plateau = 1e99;
    for (double g : gaps.back()) plateau = std::min(plateau, g);
    worst_plateau = std::max(worst_plateau, plateau);
  }

  std::vector<std::string> cols = {"k"};
  for (int t = 0; t < trials; ++t) cols.push_back("g" + std::to_string(t));
  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> row = {static_cast<double>(k)};
    for (int t = 0; t < trials; ++t) row.push_back(gaps[static_cast<size_t>(t)][static_cast<size_t>(k)]);
    rows.push_back(std::move(row));
  }
  write_rows(fs::path(c.dir) / "curve", "decay", c.format, cols, rows);
  std::printf("label %d (%s): %d perturbed starts, |delta0|=%.1e, worst plateau %.3e\n",
              chart.label, chart.type_tag.c_str(), trials, delta0, worst_plateau);
  return 0;
}

int cmd_flow_demo() {
  auto corpus = corpus::load_corpus(corpus::default_corpus_path());
  std::printf("%-20s %3s %3s %12s %14s\n", "field", "n", "q", "T", "transport res");
  for (const auto& e : corpus) {
    Segment seg = corpus::make_segment(e);
    SegmentSensitivity ss = segment_sensitivities(seg);
    const Vec f0 = seg.field.f(seg.x0, seg.p);
    const Vec f1 = seg.field.f(ss.x1, seg.p);
    const double res = (ss.X1 * f0 - f1).norm() / std::max(1.0, f1.norm());
    std::printf("%-20s %3d %3d %12.6f %14.3e\n", e.name.c_str(), e.n, e.q, e.T, res);
  }

  // period and phase sensitivities of the circular limit cycle
  for (const auto& e : corpus) {
    if (e.name != "hopf") continue;
    Segment seg = corpus::make_segment(e);
    SegmentSensitivity ss = segment_sensitivities(seg);
    RowVec w = periodic_left_eigenvector(ss.X1, ss.fx1);
    RowVec dT = period_sensitivity(w, ss.P1);
    RowVec lam = asymptotic_phase_gradient(ss.X1, seg.field.f(seg.x0, seg.p));
    std::printf("\ncircular limit cycle (omega=%g):\n", seg.p[0]);
    std::printf("  period T          = %11.4e  (2 pi / omega = %11.4e)\n", seg.T,
                2 * M_PI / seg.p[0]);
    std::printf("  dT/domega         = %11.4e  (-2 pi / omega^2 = %11.4e)\n", dT[0],
                -2 * M_PI / (seg.p[0] * seg.p[0]));
    std::printf("  dT/dgrowth        = %11.4e\n", dT[1]);
    std::printf("  phase gradient    = (%11.4e, %11.4e), lambda^T f = %11.4e\n",
                lam[0], lam[1], lam.dot(seg.field.f(seg.x0, seg.p)));
  }
  return 0;
}

int cmd_hybrid_demo() {
  // impact linearization of the bouncing ball at a downward wall hit
  {
    VectorField vf = corpus::ball_field();
    Vec p(2);
    p << 9.81, 0.7;
    Vec x0(2);
    x0 << 0.0, -3.0;
    HybridJunction j{vf, vf, corpus::restitution_jump(), corpus::floor_section(), x0, p};
    Saltation s = saltation(j);
    std::printf("bouncing ball at x = (0, %.1f), restitution %.1f:\n", x0[1], p[1]);
    std::printf("  dxD = [%11.4e %11.4e; %11.4e %11.4e]\n", s.dxD(0, 0), s.dxD(0, 1),
                s.dxD(1, 0), s.dxD(1, 1));
    std::printf("  dpD = [%11.4e %11.4e; %11.4e %11.4e]\n", s.dpD(0, 0), s.dpD(0, 1),
                s.dpD(1, 0), s.dpD(1, 1));
  }

  // hybrid period sensitivities of the spiral-with-wall impact cycle
  {
    Vec p(2);
    p << 0.1, 0.4;  // (damping, restitution)
    corpus::SpiralCycle sc = corpus::spiral_cycle(p);
    HybridMonodromy m = corpus::spiral_monodromy(sc);
    RowVec dT = hybrid_period_sensitivity(m);
    const Vec fB = sc.vf.f(sc.xB, sc.p);
    std::printf("\nspiral with wall (damping %.2f, restitution %.2f):\n", p[0], p[1]);
    std::printf("  impact speed      = %11.4e\n", sc.x_hit[1]);
    std::printf("  period            = %11.4e\n", sc.T_full);
    std::printf("  |G_x f - f|/|f|   = %11.4e\n", (m.G_x * fB - fB).norm() / fB.norm());
    std::printf("  dT/ddamping       = %11.4e\n", dT[0]);
    std::printf("  dT/drestitution   = %11.4e\n", dT[1]);
  }
  return 0;
}

// ------------------------------------------------------------ verification

struct Checker {
  int failures = 0;
  void check(const std::string& what, bool ok) {
    std::printf("%s  %s\n", ok ? "PASS" : "FAIL", what.c_str());
    if (!ok) ++failures;
  }
};

int verify_flow() {
  Checker ck;
  auto corpus = corpus::load_corpus(corpus::default_corpus_path());
  for (const auto& e : corpus) {
    Segment seg = corpus::make_segment(e);
    SegmentSensitivity ss = segment_sensitivities(seg);
    const Vec f0 = seg.field.f(seg.x0, seg.p);
    const Vec f1 = seg.field.f(ss.x1, seg.p);
    const double res = (ss.X1 * f0 - f1).norm() / std::max(1.0, f1.norm());
    ck.check("transport identity X(1) f(x0) = f(x1) for " + e.name, res <= 1e-8);
    if (e.name == "hopf") {
      RowVec w = periodic_left_eigenvector(ss.X1, ss.fx1);
      RowVec dT = period_sensitivity(w, ss.P1);
      const double ref = -2 * M_PI / (seg.p[0] * seg.p[0]);
      ck.check("period sensitivity dT/domega = -2 pi / omega^2",
               std::abs(dT[0] - ref) <= 1e-6);
      ck.check("period insensitive to the growth parameter", std::abs(dT[1]) <= 1e-6);
      RowVec lam = asymptotic_phase_gradient(ss.X1, f0);
      ck.check("phase gradient normalization lambda^T f = 1",
               std::abs(lam.dot(f0) - 1.0) <= 1e-6);
    }
  }
  return ck.failures ? 1 : 0;
}

int verify_saltation() {
  Checker ck;
  Vec p(2);
  p << 9.81, 0.7;
  Vec x0(2);
  x0 << 0.0, -3.0;
  VectorField vf = corpus::ball_field();

  // identity jump on a transversal crossing leaves the linearization alone
  JumpMap ident;
  ident.g = [](const Vec& x, const Vec&) { return x; };
  ident.gx = [](const Vec& x, const Vec&) { return Mat(Mat::Identity(x.size(), x.size())); };
  ident.gp = [](const Vec& x, const Vec& pp) { return Mat(Mat::Zero(x.size(), pp.size())); };
  Saltation si = saltation(HybridJunction{vf, vf, ident, corpus::floor_section(), x0, p});
  ck.check("identity jump: no event-surface correction", si.lam_es.norm() <= 1e-12);
  ck.check("identity jump: dxD = I", (si.dxD - Mat::Identity(2, 2)).norm() <= 1e-12);
  ck.check("identity jump: dpD = 0", si.dpD.norm() <= 1e-12);

  // impact with restitution against the closed form
  // dxD = [-r, 0; -gamma (1+r)/v, -r], dpD = [0, 0; 0, -v]
  Saltation s =
      saltation(HybridJunction{vf, vf, corpus::restitution_jump(), corpus::floor_section(), x0, p});
  const double gam = p[0], r = p[1], v = x0[1];
  Mat dxD_ref(2, 2), dpD_ref(2, 2);
  dxD_ref << -r, 0, -gam * (1 + r) / v, -r;
  dpD_ref << 0, 0, 0, -v;
  ck.check("impact dxD matches the closed form", (s.dxD - dxD_ref).norm() <= 1e-12);
  ck.check("impact dpD matches the closed form", (s.dpD - dpD_ref).norm() <= 1e-12);

  // hybrid period sensitivities of the spiral cycle against measured periods
  Vec ps(2);
  ps << 0.1, 0.4;
  corpus::SpiralCycle sc = corpus::spiral_cycle(ps);
  RowVec dT = hybrid_period_sensitivity(corpus::spiral_monodromy(sc));
  const double del = 1e-5;
  for (int i = 0; i < 2; ++i) {
    Vec pp = ps, pm = ps;
    pp[i] += del;
    pm[i] -= del;
    const double fd =
        (corpus::spiral_cycle(pp).T_full - corpus::spiral_cycle(pm).T_full) / (2 * del);
    ck.check("spiral period sensitivity vs measured periods, parameter " +
                 std::to_string(i),
             std::abs(dT[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
  return ck.failures ? 1 : 0;
}

int verify_adjoint_fd(const Common& c) {
  Checker ck;
  const fs::path tmp = fs::temp_directory_path() / "conadj-verify";
  fs::create_directories(tmp);
  RunStore store = osc::run_first(tmp, nullptr, make_tweak(c));
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  const Chart& end = osc::chart_nearest(store, sys, "e.da", 1.0);
  const double av = sys.value(end, "av");
  const double ep = sys.value(end, "ep");
  const double ze = sys.value(end, "ze");

  // the complementary parameters are minus the derivatives of the explicit
  // amplitude-difference response
  struct Row {
    const char* lbl;
    int arg;
  };
  for (const Row& row : {Row{"e.av", 0}, Row{"e.ep", 1}, Row{"e.ze", 2}}) {
    auto fn = [&](double x) {
      double a = av, e = ep, z = ze;
      (row.arg == 0 ? a : row.arg == 1 ? e : z) = x;
      return osc::delta_closed_form(a, e, z);
    };
    const double x0 = row.arg == 0 ? av : row.arg == 1 ? ep : ze;
    const double fd = fd_richardson(fn, x0, 1e-4);
    const double got = sys.value(end, row.lbl);
    ck.check(std::string(row.lbl) + " = -d(da)/d(parameter) [FD]",
             std::abs(got + fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
  }
  return ck.failures ? 1 : 0;
}

int verify_curve() {
  Checker ck;
  invc::CurveProblem cp = invc::build_curve_problem(55, 34);
  RunStore store = invc::run_curve_window(cp, -0.05, 0.0);
  ck.check("reduced-mesh continuation produced charts", !store.charts.empty());
  bool residuals_ok = true;
  for (const Chart& ch : store.charts) residuals_ok = residuals_ok && ch.norm_f <= 1e-6;
  ck.check("residual below tolerance on every stored chart", residuals_ok);

  const Chart* circle = nullptr;
  for (const Chart& ch : store.charts)
    if (std::abs(cp.sys.value(ch, "r2")) < 1e-8) circle = &ch;
  ck.check("sweep reaches the circular solution at r2 = 0", circle != nullptr);
  if (circle) {
    invc::CurveState cs = invc::extract_state(cp, *circle);
    Mat qphi = invc::q_phi_limit(cp.map, cs);
    const double radius = invc::gamma_hat_radius(cp.map, cs, qphi);
    ck.check("transversal radius 0.5 at the circular solution",
             std::abs(radius - 0.5) <= 1e-3);
  }

  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  const std::vector<int> fib = {1, 2, 3, 5, 8, 13, 21, 34, 55, 89};
  ck.check("small-divisor minima at the golden rotation number follow the "
           "Fibonacci numbers",
           invc::divisor_argmin_sequence(golden, 100) == fib);
  return ck.failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"staged continuation problems with adjoint-based sensitivities"};
  app.require_subcommand(1);
  int rc = 0;

  Common c_oa, c_os, c_ic, c_is, c_ip, c_vf;
  std::string spec_mode = "radius", spec_label = "A", phase_label = "A", suite;
  int ic_q = 377, ic_p = 233, is_q = 377, is_p = 233, ip_q = 377, ip_p = 233;
  double delta0 = 1e-4;
  int k_max = 200;

  auto* oa = app.add_subcommand("osc-adjoint",
                                "oscillator demo: sweep the adjoint homotopy parameter");
  add_common(oa, c_oa);
  oa->callback([&] { rc = cmd_osc_adjoint(c_oa); });

  auto* os = app.add_subcommand("osc-sweep",
                                "oscillator demo: sweep the mean frequency, locate folds");
  add_common(os, c_os);
  os->callback([&] { rc = cmd_osc_sweep(c_os); });

  auto* ic = app.add_subcommand("invc-continue",
                                "invariant-curve demo: continue the family in r2");
  add_common(ic, c_ic);
  ic->add_option("--q", ic_q, "mesh size")->check(CLI::PositiveNumber);
  ic->add_option("--p-rot", ic_p, "rotation numerator")->check(CLI::PositiveNumber);
  ic->callback([&] { rc = cmd_invc_continue(c_ic, ic_q, ic_p); });

  auto* is = app.add_subcommand("invc-spectrum",
                                "transversal spectrum at a stored curve chart");
  add_common(is, c_is);
  is->add_option("--mode", spec_mode, "radius (power iteration) or full (dense)")
      ->check(CLI::IsMember({"radius", "full"}))
      ->capture_default_str();
  is->add_option("--label", spec_label, "chart: label number, type tag, first or last")
      ->capture_default_str();
  is->add_option("--q", is_q, "mesh size")->check(CLI::PositiveNumber);
  is->add_option("--p-rot", is_p, "rotation numerator")->check(CLI::PositiveNumber);
  is->callback([&] { rc = cmd_invc_spectrum(c_is, spec_mode, spec_label, is_q, is_p); });

  auto* ip = app.add_subcommand("invc-phase",
                                "asymptotic-phase decay for 20 perturbed starts");
  add_common(ip, c_ip);
  ip->add_option("--label", phase_label, "chart: label number, type tag, first or last")
      ->capture_default_str();
  ip->add_option("--q", ip_q, "mesh size")->check(CLI::PositiveNumber);
  ip->add_option("--p-rot", ip_p, "rotation numerator")->check(CLI::PositiveNumber);
  ip->add_option("--delta0", delta0, "perturbation size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ip->add_option("--k-max", k_max, "iterates per trial")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ip->callback([&] { rc = cmd_invc_phase(c_ip, phase_label, ip_q, ip_p, delta0, k_max); });

  app.add_subcommand("flow-demo", "variational-flow identities on the example fields")
      ->callback([&] { rc = cmd_flow_demo(); });
  app.add_subcommand("hybrid-demo", "impact linearization and hybrid period sensitivities")
      ->callback([&] { rc = cmd_hybrid_demo(); });

  auto* vf = app.add_subcommand("verify", "run a verification suite");
  vf->add_option("suite", suite, "flow | saltation | adjoint-fd | curve")
      ->required()
      ->check(CLI::IsMember({"flow", "saltation", "adjoint-fd", "curve"}));
  add_common(vf, c_vf);
  vf->callback([&] {
    if (suite == "flow")
      rc = verify_flow();
    else if (suite == "saltation")
      rc = verify_saltation();
    else if (suite == "adjoint-fd")
      rc = verify_adjoint_fd(c_vf);
    else
      rc = verify_curve();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
