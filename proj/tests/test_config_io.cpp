#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "fsep/config.hpp"
#include "fsep/errors.hpp"
#include "fsep/io.hpp"

using namespace fsep;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_of(const json& j) {
  try {
    from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fsep_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(FSEP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsAreThePaperScenario) {
  const ScenarioFile f = from_json(json::object());
  const Scenario ref = paper_scenario();
  EXPECT_EQ(f.scenario.name, ref.name);
  EXPECT_EQ(f.scenario.fault.lambda, ref.fault.lambda);
  EXPECT_EQ(f.scenario.fault.cog_offset, ref.fault.cog_offset);
  EXPECT_EQ(f.scenario.schedule.size(), ref.schedule.size());
  EXPECT_EQ(f.scenario.controller.smc.k, ref.controller.smc.k);
  EXPECT_EQ(f.scenario.controller.ftdo.scheme, FtdoScheme::Implicit);
}

TEST(Config, RoundTrip) {
  ScenarioFile f;
  f.scenario = paper_scenario();
  f.scenario.seed = 12345678901234ULL;
  f.scenario.fault.lambda(0) = 0.55;
  f.scenario.fault.aging_mask = {true, false, true, false};
  f.scenario.controller.ftdo.scheme = FtdoScheme::Explicit;
  f.scenario.mode = ControllerMode::NoFDD;
  f.montecarlo.runs = 17;
  f.montecarlo.compare_nofdd = true;
  const json j = to_json(f);
  const ScenarioFile g = from_json(j);
  EXPECT_EQ(to_json(g), j);
  EXPECT_EQ(g.scenario.seed, 12345678901234ULL);
  EXPECT_EQ(g.scenario.fault.aging_mask[2], true);
  EXPECT_EQ(g.scenario.controller.ftdo.scheme, FtdoScheme::Explicit);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_NE(error_of({{"duratoin", 10}}).find("duratoin"), std::string::npos);
  EXPECT_NE(error_of({{"fault", {{"lambda5", 0.5}}}}).find("fault.lambda5"), std::string::npos);
  json bad = default_config();
  bad["excitation"]["schedule"][0]["extra"] = 1;
  EXPECT_NE(error_of(bad).find("extra"), std::string::npos);
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_FALSE(error_of({{"dt", "fast"}}).empty());
  EXPECT_FALSE(error_of({{"mode", "fxt"}}).empty());
  EXPECT_FALSE(error_of({{"seed", -1}}).empty());
  EXPECT_FALSE(error_of({{"controller", {{"ftdo", {{"scheme", "rk4"}}}}}}).empty());
  EXPECT_FALSE(error_of({{"fault", {{"aged_rotors", {5}}}}}).empty());
  EXPECT_FALSE(error_of({{"controller", {{"smc", {{"k", 1.0}}}}}}).empty());  // below k_min
}

TEST(Config, ParseErrorNamesLineAndColumn) {
  try {
    parse_json_text("{\n  \"dt\": 0.001,\n  \"seed\": ,\n}", "bad.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.json"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
  }
}

TEST(Config, Overrides) {
  json j = default_config();
  apply_override(j, "fault.lambda1=0.5");
  apply_override(j, "name=probe");
  apply_override(j, "fault.l_m=[0.0,0.01,0.0]");
  const ScenarioFile f = from_json(j);
  EXPECT_EQ(f.scenario.fault.lambda(0), 0.5);
  EXPECT_EQ(f.scenario.name, "probe");
  EXPECT_EQ(f.scenario.fault.cog_offset, Vec3(0.0, 0.01, 0.0));
  EXPECT_THROW(apply_override(j, "fault.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST(Config, LoadLayersFileThenOverrides) {
  const fs::path p = scratch("layer.json");
  std::ofstream(p) << R"({"fault": {"lambda1": 0.6}, "duration": 45})";
  const ScenarioFile f = load_scenario(p, {"duration=44"});
  EXPECT_EQ(f.scenario.fault.lambda(0), 0.6);
  EXPECT_EQ(f.scenario.duration, 44.0);
  EXPECT_THROW(load_scenario(scratch("missing.json")), ConfigError);
}

TEST(Csv, HeaderMatchesColumns) {
  Scenario sc = paper_scenario();
  sc.duration = 0.01;
  std::ostringstream out;
  write_timeseries_csv(out, run(sc));
  const std::string text = out.str();
  const std::string header = text.substr(0, text.find("\r\n"));
  std::string expected;
  for (const auto& c : timeseries_columns()) expected += (expected.empty() ? "" : ",") + c;
  EXPECT_EQ(header, expected);
  // One row per step, each with as many fields as the header.
  std::istringstream lines(text);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    ASSERT_EQ(line.back(), '\r');
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), static_cast<long>(timeseries_columns().size() - 1));
    ++rows;
  }
  EXPECT_EQ(rows, 11);
}

TEST(Csv, NumbersRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, 0.0}) EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Report, EigenReportIsStable) {
  const json r = eigen_report(paper_scenario());
  EXPECT_FALSE(r.empty());
  EXPECT_EQ(r, eigen_report(paper_scenario()));
}

TEST(Envelope, TableCoversDuration) {
  const auto rows = envelope_table(paper_scenario(), 1.0);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.front().t, 0.0);
  for (const auto& r : rows) EXPECT_TRUE(r.env.nonempty());
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli_run");
  EXPECT_EQ(cli("run --out " + out.string() + " --override duration=21 --override fault.lambda1=0.5"), 0);
  EXPECT_TRUE(fs::exists(out / "timeseries.csv"));
  EXPECT_TRUE(fs::exists(out / "eigen_report.json"));
  const json m = json::parse(slurp(out / "metrics.json"));
  for (const char* key : {"mte", "mee", "mr"}) EXPECT_TRUE(m.contains(key)) << key;

  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << "{ \"dt\": }";
  EXPECT_EQ(cli("run --scenario " + bad.string() + " --out " + out.string()), 3);
  EXPECT_EQ(cli("run --override nope=1 --out " + out.string()), 3);
  EXPECT_EQ(cli("montecarlo -n 0 --out " + out.string()), 3);
  EXPECT_EQ(cli("envelope --override vehicle.f_max=2.0"), 4);
}

TEST(Cli, MonteCarloIndependentOfJobs) {
  const fs::path a = scratch("mc1"), b = scratch("mc4");
  const std::string common = "montecarlo -n 4 --override duration=42 --override 'excitation.schedule=[{\"phase\":\"constant\",\"t_start\":37,\"t_end\":41}]'";
  ASSERT_EQ(cli(common + " --jobs 1 --out " + a.string()), 0);
  ASSERT_EQ(cli(common + " --jobs 4 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "aggregate.json"), slurp(b / "aggregate.json"));
  EXPECT_EQ(slurp(a / "runs.csv"), slurp(b / "runs.csv"));
}

TEST(Csv, ColumnsDocumentedInDataDictionary) {
  const std::string doc = slurp(fs::path(FSEP_SOURCE_DIR) / "docs" / "data_dictionary.md");
  ASSERT_FALSE(doc.empty());
  auto documented = [&doc](const std::string& col) {
    if (doc.find("`" + col + "`") != std::string::npos) return true;
    // Numbered families are written as `name1` .. `name4`.
    const std::string stem = col.substr(0, col.size() - 1);
    return std::isdigit(static_cast<unsigned char>(col.back())) &&
           doc.find("`" + stem + "1` .. `" + stem + "4`") != std::string::npos;
  };
  for (const auto& c : timeseries_columns()) EXPECT_TRUE(documented(c)) << c;
  for (const auto& c : montecarlo_columns()) EXPECT_TRUE(documented(c)) << c;
}
