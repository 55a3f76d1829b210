#include "conadj/io.hpp"
#include "conadj/osc.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace conadj;

namespace {

std::filesystem::path temp_root() {
  auto p = std::filesystem::temp_directory_path() / "conadj-test-io";
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("stored charts round-trip bit-exactly") {
  auto root = temp_root();
  RunStore store = osc::run_first(root);
  RunStore back = load_run(root, "run1");

  REQUIRE(back.charts.size() == store.charts.size());
  CHECK(back.released == store.released);
  CHECK(back.windows == store.windows);
  for (size_t k = 0; k < store.charts.size(); ++k) {
    const Chart& a = store.charts[k];
    const Chart& b = back.charts[k];
    CHECK(a.label == b.label);
    CHECK(a.type_tag == b.type_tag);
    CHECK((a.u - b.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.lam - b.lam).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.eta - b.eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.tangent - b.tangent).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.norm_f == b.norm_f);
    CHECK(a.norm_d == b.norm_d);
    CHECK(a.norm_U == b.norm_U);
  }
}

TEST_CASE("saving the same run twice is byte-identical") {
  auto root = temp_root();
  AugmentedSystem sys = osc::build_problem(osc::default_u0());
  RunStore store = osc::run_first(root);
  save_run(root / "a", "copy", sys, store);
  save_run(root / "b", "copy", sys, store);
  for (const char* f : {"meta.json", "charts.jsonl", "branch.csv"})
    CHECK(slurp(root / "a" / "copy" / f) == slurp(root / "b" / "copy" / f));
}

TEST_CASE("branch table has one row per chart with released columns") {
  auto root = temp_root();
  RunStore store = osc::run_first(root);
  std::ifstream is(root / "run1" / "branch.csv");
  std::string header;
  REQUIRE(std::getline(is, header));
  CHECK(header == "label,type,da,e.da,e.av,e.ep,e.ze");
  size_t rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == store.charts.size());
}

TEST_CASE("chart readback accessors") {
  auto root = temp_root();
  RunStore store = osc::run_first(root);
  const Chart& last = store.charts.back();

  Chart c = read_chart(root, "run1", last.label);
  CHECK((c.u - last.u).cwiseAbs().maxCoeff() == 0.0);

  Chart s = read_solution(root, "run1", last.label);
  CHECK((s.u - last.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.tangent.size() == 0);

  auto [lam, eta] = read_adjoint(root, "run1", last.label);
  CHECK((lam - last.lam).cwiseAbs().maxCoeff() == 0.0);
  CHECK((eta - last.eta).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(read_chart(root, "run1", 9999), IoError);
  CHECK_THROWS_AS(load_run(root, "no-such-run"), IoError);
}
