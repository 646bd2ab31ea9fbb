#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "common.hpp"

using namespace vslctl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vslctl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config(const std::string& name) {
  auto c = preset("paper-sec5-fixed");
  c.controller = ControllerSelection::both;
  c.cells = 60;
  c.snapshots = 11;
  c.horizon = 10.0;
  c.out_dir = scratch(name).string();
  return c;
}

}  // namespace

TEST(Runner, ConfigRoundTrip) {
  for (const auto& name : preset_names()) {
    const auto c = preset(name);
    const auto text = serialize(c);
    EXPECT_EQ(serialize(parse_config(text)), text) << name;
  }
  RunConfig c;
  c.name = "odd values";
  c.diagram.kind = "tabulated";
  c.diagram.f = {0.0, 0.1 / 3.0, 1e-300};
  c.diagram.df = {1.0, 2.0 / 3.0, -0.5};
  c.diagram.d2f = {-1.0, -1.0, -1.0};
  c.initial.kind = "polynomial";
  c.initial.coeffs = {0.0, 0.1, -0.07};
  c.k = 0.1 + 0.2;
  c.oracle = true;
  c.oracle_settings.scheme = OracleScheme::upwind_euler;
  const auto text = serialize(c);
  const auto back = parse_config(text);
  EXPECT_EQ(serialize(back), text);
  EXPECT_EQ(back.k, c.k);
  EXPECT_EQ(back.diagram.f, c.diagram.f);
}

TEST(Runner, BundledPresetFilesMatchBuiltins) {
  for (const auto& name : preset_names()) {
    const auto path = fs::path(VSLCTL_SOURCE_DIR) / "presets" / (name + ".ini");
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(slurp(path), serialize(preset(name))) << name;
  }
}

TEST(Runner, ParseErrors) {
  EXPECT_THROW(parse_config("[scenario]\ncells = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("[scenario]\ncells = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[controller]\nlaw = pid\n"), ConfigError);
  EXPECT_THROW(parse_config("[diagram]\nkind = spline\n"), ConfigError);
  EXPECT_THROW(parse_config("[oracle]\nscheme = godunov\n"), ConfigError);
  EXPECT_THROW(parse_config("not an ini line without equals\n"), ConfigError);
  EXPECT_THROW(preset("paper-unknown"), ConfigError);
}

TEST(Runner, CertifyReportsEachCondition) {
  auto c = preset("paper-sec5-fixed");
  c.controller = ControllerSelection::both;
  bool ok = true;
  const auto text = certify(c, &ok);
  EXPECT_FALSE(ok);
  EXPECT_NE(text.find("gain_range"), std::string::npos);
  EXPECT_NE(text.find("1.428571429"), std::string::npos);
  EXPECT_NE(text.find("flow_margin"), std::string::npos);
  const auto conc = text.find("concavity_margin");
  ASSERT_NE(conc, std::string::npos);
  EXPECT_NE(text.substr(conc, text.find('\n', conc) - conc).find("VIOLATED"), std::string::npos);

  c.k = 2.0;
  c.controller = ControllerSelection::free_inlet;
  const auto bad = certify(c, &ok);
  EXPECT_FALSE(ok);
  EXPECT_NE(bad.find("1.428571429  -> VIOLATED"), std::string::npos);
}

TEST(Runner, RunWritesTracesAndIsDeterministic) {
  const auto a = small_config("det_a");
  auto b = a;
  b.out_dir = scratch("det_b").string();
  const auto ra = run(a);
  const auto rb = run(b);
  EXPECT_EQ(ra.exit_code, kOk) << ra.report;
  EXPECT_EQ(rb.exit_code, kOk);
  for (const char* sub : {"free_inlet", "fixed_inlet"})
    for (const char* file : {"density.csv", "control.csv", "norms.csv", "flows.csv"}) {
      const auto pa = fs::path(a.out_dir) / sub / file;
      ASSERT_TRUE(fs::exists(pa)) << pa;
      EXPECT_EQ(slurp(pa), slurp(fs::path(b.out_dir) / sub / file)) << pa;
    }
  EXPECT_TRUE(fs::exists(fs::path(a.out_dir) / "free_inlet" / "bottleneck.csv"));
  EXPECT_FALSE(fs::exists(fs::path(a.out_dir) / "fixed_inlet" / "bottleneck.csv"));
  EXPECT_EQ(slurp(fs::path(a.out_dir) / "report.txt"), ra.report);
  // Reports differ only in the output directory they never mention.
  EXPECT_EQ(ra.report, rb.report);
}

TEST(Runner, CsvSchema) {
  const auto c = small_config("schema");
  ASSERT_EQ(run(c).exit_code, kOk);
  std::ifstream in(fs::path(c.out_dir) / "fixed_inlet" / "norms.csv");
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "t,sup_deviation,bound");
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    std::istringstream ls(row);
    std::string t, s, bnd;
    std::getline(ls, t, ',');
    std::getline(ls, s, ',');
    std::getline(ls, bnd);
    EXPECT_LE(std::stod(s), std::stod(bnd)) << row;
  }
  EXPECT_EQ(rows, c.snapshots);
  std::ifstream dens(fs::path(c.out_dir) / "fixed_inlet" / "density.csv");
  std::getline(dens, header);
  EXPECT_EQ(header, "t,x,rho");
}

TEST(Runner, StrictModeStopsUncertifiedRun) {
  auto c = small_config("strict");
  c.controller = ControllerSelection::fixed_inlet;
  c.mode = CalibrationMode::strict;
  const auto r = run(c);
  EXPECT_EQ(r.exit_code, kCertificationError);
  EXPECT_NE(r.report.find("concavity_margin"), std::string::npos);
}

TEST(Runner, CompareDirectories) {
  auto c = small_config("cmp");
  c.controller = ControllerSelection::free_inlet;
  c.oracle = true;
  const auto r = run(c);
  ASSERT_EQ(r.exit_code, kOk) << r.report;
  EXPECT_NE(r.report.find("oracle_agreement"), std::string::npos);
  const auto text = compare_dirs(fs::path(c.out_dir) / "free_inlet", fs::path(c.out_dir) / "free_inlet_oracle");
  EXPECT_NE(text.find("max |drho|"), std::string::npos);
  const auto self = compare_dirs(fs::path(c.out_dir) / "free_inlet", fs::path(c.out_dir) / "free_inlet");
  EXPECT_NE(self.find("max |drho| = 0\n"), std::string::npos);
}
