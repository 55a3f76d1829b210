#pragma once

// Run persistence. Each stored run is a directory <root>/<run_name>/ with
//   meta.json     settings, released labels, windows, events, label index
//   charts.jsonl  one JSON object per chart (full state, exact doubles)
//   branch.csv    label, type and released-label columns at %.17g
// JSON doubles survive the round trip bit-exactly at 17 significant digits.

#include "conadj/continuation.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace conadj {

namespace detail {

using json = nlohmann::json;

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline Vec vec_from_json(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (size_t k = 0; k < a.size(); ++k) v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
  return v;
}

inline json chart_to_json(const Chart& c) {
  json j;
  j["label"] = c.label;
  j["type"] = c.type_tag;
  j["u"] = vec_to_json(c.u);
  j["mu"] = vec_to_json(c.mu);
  j["lam"] = vec_to_json(c.lam);
  j["eta"] = vec_to_json(c.eta);
  j["tangent"] = vec_to_json(c.tangent);
  j["norm_d"] = c.norm_d;
  j["norm_f"] = c.norm_f;
  j["norm_U"] = c.norm_U;
  j["step_h"] = c.step_h;
  return j;
}

inline Chart chart_from_json(const json& j) {
  Chart c;
  c.label = j.at("label").get<int>();
  c.type_tag = j.at("type").get<std::string>();
  c.u = vec_from_json(j.at("u"));
  c.mu = vec_from_json(j.at("mu"));
  c.lam = vec_from_json(j.at("lam"));
  c.eta = vec_from_json(j.at("eta"));
  c.tangent = vec_from_json(j.at("tangent"));
  c.norm_d = j.at("norm_d").get<double>();
  c.norm_f = j.at("norm_f").get<double>();
  c.norm_U = j.at("norm_U").get<double>();
  c.step_h = j.value("step_h", 0.0);
  return c;
}

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Write a completed run under <root>/<run_name>/.
inline void save_run(const std::filesystem::path& root, const std::string& run_name,
                     const AugmentedSystem& sys, const RunStore& store) {
  namespace fs = std::filesystem;
  using detail::json;
  const fs::path dir = root / run_name;
  fs::create_directories(dir);

  json meta;
  meta["run_name"] = run_name;
  meta["released"] = store.released;
  json wins = json::object();
  for (const auto& [lbl, w] : store.windows) wins[lbl] = {w.first, w.second};
  meta["windows"] = wins;
  json evs = json::array();
  for (const auto& ev : store.events)
    evs.push_back({{"name", ev.name}, {"label", ev.label}, {"value", ev.value}});
  meta["events"] = evs;
  json labels = json::array();
  for (const Chart& c : store.charts)
    labels.push_back({{"label", c.label}, {"type", c.type_tag}});
  meta["labels"] = labels;
  meta["mu_labels"] = sys.mu_labels();
  meta["comp_labels"] = sys.comp_labels();
  {
    std::ofstream os(dir / "meta.json");
    os << meta.dump(2) << "\n";
  }
  {
    std::ofstream os(dir / "charts.jsonl");
    for (const Chart& c : store.charts) os << detail::chart_to_json(c).dump() << "\n";
  }
  {
    std::ofstream os(dir / "branch.csv");
    os << "label,type";
    for (const auto& lbl : store.released) os << "," << lbl;
    os << "\n";
    for (const Chart& c : store.charts) {
      os << c.label << "," << c.type_tag;
      for (const auto& lbl : store.released) os << "," << detail::g17(sys.value(c, lbl));
      os << "\n";
    }
  }
}

/// Read a full run back (charts in stored order).
inline RunStore load_run(const std::filesystem::path& root, const std::string& run_name) {
  namespace fs = std::filesystem;
  using detail::json;
  const fs::path dir = root / run_name;
  std::ifstream ms(dir / "meta.json");
  if (!ms) throw IoError("cannot open " + (dir / "meta.json").string());
  json meta = json::parse(ms);

  RunStore store;
  store.released = meta.at("released").get<std::vector<std::string>>();
  for (auto it = meta.at("windows").begin(); it != meta.at("windows").end(); ++it)
    store.windows[it.key()] = {it.value()[0].get<double>(), it.value()[1].get<double>()};
  for (const auto& ev : meta.at("events"))
    store.events.push_back({ev.at("name").get<std::string>(),
                            ev.at("label").get<std::string>(),
                            ev.at("value").get<double>()});

  std::ifstream cs(dir / "charts.jsonl");
  if (!cs) throw IoError("cannot open " + (dir / "charts.jsonl").string());
  std::string line;
  while (std::getline(cs, line)) {
    if (line.empty()) continue;
    store.charts.push_back(detail::chart_from_json(json::parse(line)));
  }
  return store;
}

/// Single chart by label.
inline Chart read_chart(const std::filesystem::path& root, const std::string& run_name,
                        int label) {
  RunStore store = load_run(root, run_name);
  return store.by_label(label);
}

/// Primal part (u, mu) of a stored chart, with zeroed adjoints sized for
/// the target system. Use when restarting a problem without adjoints.
inline Chart read_solution(const std::filesystem::path& root, const std::string& run_name,
                           int label) {
  Chart c = read_chart(root, run_name, label);
  c.tangent = Vec();
  c.norm_d = c.norm_f = c.norm_U = 0.0;
  return c;
}

/// Adjoint part (lam, eta) of a stored chart.
inline std::pair<Vec, Vec> read_adjoint(const std::filesystem::path& root,
                                        const std::string& run_name, int label) {
  Chart c = read_chart(root, run_name, label);
  return {c.lam, c.eta};
}

}  // namespace conadj
