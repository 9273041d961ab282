#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ahgeo/cli.hpp"

using namespace ahgeo;
using namespace ahgeo::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ahgeo_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& f) {
  std::ifstream in(f, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs the built binary; returns its exit status.
int run_binary(const std::string& args, const std::string& log = "/dev/null") {
  const char* bin = std::getenv("AHGEO_CLI");
  if (!bin) bin = AHGEO_CLI_PATH;
  const int rc = std::system((std::string(bin) + " " + args + " >" + log + " 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "ahgeo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return rc;
}

}  // namespace

TEST(Grid, Inclusive) {
  const auto g = parse_grid("2:12:1");
  ASSERT_EQ(g.size(), 11u);
  EXPECT_EQ(g.front(), 2.0);
  EXPECT_EQ(g.back(), 12.0);
  EXPECT_EQ(parse_grid("0.5:1:0.1").size(), 6u);
  EXPECT_EQ(parse_grid("3:3:1").size(), 1u);
  for (const char* bad : {"2:12", "2:12:0", "12:2:1", "a:b:c", "1:2:1x"}) EXPECT_THROW(parse_grid(bad), UsageError) << bad;
}

TEST(ModelArg, ShorthandAndJson) {
  EXPECT_EQ(parse_model_arg("hyperbolic:3"), (nlohmann::json{{"model", "hyperbolic"}, {"n", 3}}));
  EXPECT_EQ(parse_model_arg("fermi:2:0.5"), (nlohmann::json{{"model", "fermi"}, {"n", 2}, {"lambda", 0.5}}));
  EXPECT_EQ(parse_model_arg("ads:1"), (nlohmann::json{{"model", "ads"}, {"m", 1.0}}));
  EXPECT_EQ(parse_model_arg(R"({"model":"ads","m":0.5})")["m"], 0.5);
  EXPECT_THROW(parse_model_arg("ads"), UsageError);
  EXPECT_THROW(parse_model_arg("fermi:2:x"), UsageError);
  EXPECT_THROW(parse_model_arg("{bad"), UsageError);
}

TEST(Point, Forms) {
  const auto f = ModelMetric::fermi(2, 1.0);
  EXPECT_EQ(parse_point(f, "core").t, 0.0);
  EXPECT_EQ(parse_point(f, "1.5").t, 1.5);
  const auto q = parse_point(f, R"({"t":0.5,"angle":1.0,"direction":[0,1]})");
  EXPECT_EQ(q.t, 0.5);
  EXPECT_EQ(q.angle, 1.0);
  EXPECT_EQ(q.direction[1], 1.0);
  EXPECT_THROW(parse_point(f, "nowhere"), UsageError);
  EXPECT_THROW(parse_point(f, R"({"t":0.5,"direction":[1,0,0]})"), DomainError);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.model = {{"model", "fermi"}, {"n", 2}, {"lambda", 1.0}};
  c.command = "audit";
  c.audit = "lipschitz";
  c.p = 1.5;
  c.t_grid = "2:12:1";
  c.eps = 0.01;
  c.seed = 7;
  c.tol_ode = 1e-10;
  const auto back = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(*back.p, 1.5);
  EXPECT_THROW(RunConfig::from_json({{"modle", 1}}), UsageError);
  EXPECT_THROW(RunConfig::from_json({{"p", "two"}}), UsageError);
  EXPECT_THROW(RunConfig::from_json({{"seed", -1}}), UsageError);
}

TEST(EmitSweep, CapacityCsv) {
  std::vector<CapacityRow> rows{{1.0, 2.0, std::nullopt, 7.38905609893065, 1.0 / 3.0, true},
                                {2.0, std::nullopt, 3.0, 4.0, 5.0, false}};
  std::ostringstream os;
  emit_sweep(rows, "csv", os);
  EXPECT_EQ(os.str(),
            "t,lower,variational,upper,ratio,sandwich\n"
            "1,2,,7.38905609893,0.333333333333,true\n"
            "2,,3,4,5,false\n");
}

TEST(EmitSweep, RelvolColumns) {
  std::vector<RelvolRow> rows{{3.0, 1.25, 12.5, 1e-9}};
  std::ostringstream os;
  emit_sweep(rows, "csv", os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t0,lower_bound,value,err");
}

TEST(EmitSweep, HeaderMatchesJsonFields) {
  std::vector<CapacityRow> rows{{1.0, 2.0, 3.0, 4.0, 5.0, true}};
  std::ostringstream os;
  emit_sweep(rows, "json", os);
  const auto j = nlohmann::json::parse(os.str());
  std::vector<std::string> keys;
  for (const auto& [k, v] : j["rows"][0].items()) keys.push_back(k);
  auto cols = CapacityRow::columns();
  std::sort(cols.begin(), cols.end());
  EXPECT_EQ(keys, cols);
  EXPECT_EQ(j["columns"].get<std::vector<std::string>>(), CapacityRow::columns());
}

TEST(EmitSweep, JsonRoundTrip) {
  std::vector<CapacityRow> rows{{1.0, 2.0, std::nullopt, 0.1 + 0.2, 1.0 / 3.0, true}};
  std::vector<RelvolRow> rv{{0.7, std::nullopt, 12.519524142, 3e-12}};
  std::ostringstream a, b;
  emit_sweep(rows, "json", a);
  emit_sweep(rv, "json", b);
  EXPECT_EQ(read_sweep_json<CapacityRow>(nlohmann::json::parse(a.str())), rows);
  EXPECT_EQ(read_sweep_json<RelvolRow>(nlohmann::json::parse(b.str())), rv);
}

TEST(EmitSweep, RefusesEmpty) {
  std::ostringstream os;
  EXPECT_THROW(emit_sweep(std::vector<CapacityRow>{}, "csv", os), UsageError);
  EXPECT_TRUE(os.str().empty());
  std::vector<RelvolRow> one{{}};
  EXPECT_THROW(emit_sweep(one, "xml", os), UsageError);
}

TEST(Sampler, RawBitsDeterministic) {
  Sampler a(7), b(7), c(8);
  const auto m = ModelMetric::fermi(3, 1.0);
  for (int i = 0; i < 10; ++i) {
    const auto p = a.point(m, 2.0), q = b.point(m, 2.0);
    EXPECT_EQ(p.t, q.t);
    EXPECT_EQ(p.direction, q.direction);
    EXPECT_NEAR(std::sqrt(dot(p.direction, p.direction)), 1.0, 1e-12);
  }
  EXPECT_NE(a.uniform(), c.uniform());
  // First draw of mt19937_64 seeded with 7, top 53 bits.
  std::mt19937_64 g(7);
  EXPECT_EQ(Sampler(7).uniform(), static_cast<double>(g() >> 11) * 0x1.0p-53);
}

TEST(Parallel, OrderedAndCapped) {
  ::setenv("AHGEO_THREADS", "3", 1);
  const auto v = parallel_map(100, [](std::size_t i) { return static_cast<int>(i * i); });
  ASSERT_EQ(v.size(), 100u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map(10, [](std::size_t i) -> int {
                 if (i == 4) throw NumericError("boom");
                 return 0;
               }),
               NumericError);
  ::setenv("AHGEO_THREADS", "zero", 1);
  EXPECT_THROW(thread_cap(), UsageError);
  ::unsetenv("AHGEO_THREADS");
}

TEST(Run, HyperbolicPole) {
  TempDir d;
  std::string text;
  ASSERT_EQ(call({"relvol", "--model", R"({"model":"hyperbolic","n":2})", "--point", "pole", "--out", d / "r.json"}, &text),
            kOk);
  const auto j = nlohmann::json::parse(slurp(d / "r.json"));
  EXPECT_NEAR(j["value"].get<double>(), 12.566, 1e-3);
  EXPECT_EQ(j["method"], "closed-form");
  EXPECT_NE(text.find("closed-form"), std::string::npos);  // summary table
}

TEST(Run, ModelInfo) {
  std::string text;
  ASSERT_EQ(call({"model-info", "--model", "fermi:2:1"}, &text), kOk);
  const auto j = nlohmann::json::parse(text.substr(0, text.find("model-info")));
  EXPECT_NEAR(j["collar"]["boundary_volume"].get<double>(), pi * pi, 1e-12);
  EXPECT_EQ(j["dimension"], 3);
}

TEST(Run, UsageErrors) {
  TempDir d;
  EXPECT_EQ(call({"relvol"}), kUsage);
  EXPECT_EQ(call({"frobnicate", "--model", "ads:1"}), kUsage);
  EXPECT_EQ(call({"relvol", "--model", "ads:-1"}), kUsage);
  EXPECT_EQ(call({"relvol", "--model", "hyperbolic:2", "--out", "/nonexistent-dir/r.json"}), kUsage);
  EXPECT_EQ(call({"relvol", "--model", "hyperbolic:2", "--format", "csv"}), kUsage);
  EXPECT_EQ(call({"capacity", "--model", "hyperbolic:2", "--p", "1", "--t-grid", "1:2:1"}), kUsage);
  EXPECT_EQ(call({"capacity", "--model", "hyperbolic:2"}), kUsage);
  EXPECT_EQ(call({"relvol", "--model", "hyperbolic:2", "--tol-quad", "-1"}), kUsage);
  EXPECT_EQ(call({"audit", "--model", "hyperbolic:2", "--audit", "nope"}), kUsage);
  EXPECT_EQ(call({"relvol", "--model", "hyperbolic:2", "--bogus"}), kUsage);
  EXPECT_EQ(call({"relvol", "--config", d / "missing.json"}), kUsage);
  EXPECT_FALSE(fs::exists(d / "r.json"));
}

TEST(Run, ConfigFileFlagsWin) {
  TempDir d;
  std::ofstream(d / "c.json") << R"({"model":"hyperbolic:2","command":"relvol","point":"pole","out":")" << (d / "a.json")
                              << R"("})";
  ASSERT_EQ(call({"--config", d / "c.json"}), kOk);
  EXPECT_EQ(nlohmann::json::parse(slurp(d / "a.json"))["model"]["n"], 2);
  ASSERT_EQ(call({"--config", d / "c.json", "--model", "hyperbolic:3", "--out", d / "b.json"}), kOk);
  EXPECT_NEAR(nlohmann::json::parse(slurp(d / "b.json"))["value"].get<double>(), 2 * pi * pi, 1e-12);
  std::ofstream(d / "bad.json") << R"({"model":"hyperbolic:2","colour":"red"})";
  EXPECT_EQ(call({"relvol", "--config", d / "bad.json"}), kUsage);
}

TEST(Run, RelvolSweep) {
  TempDir d;
  ASSERT_EQ(call({"relvol", "--model", "fermi:2:0.05", "--t-grid", "1:3:1", "--format", "csv", "--out", d / "s.csv"}), kOk);
  std::istringstream in(slurp(d / "s.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t0,lower_bound,value,err");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Run, CapacityHyperbolic) {
  TempDir d;
  ASSERT_EQ(call({"capacity", "--model", "hyperbolic:2", "--p", "2", "--t-grid", "1:3:1", "--N", "256", "--out",
                  d / "c.json"}),
            kOk);
  const auto j = nlohmann::json::parse(slurp(d / "c.json"));
  const auto rows = read_sweep_json<CapacityRow>(j);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.sandwich);
    EXPECT_NEAR(r.upper, cap_hyperbolic_closed(2, 2.0, r.t), 1e-6 * r.upper);
    ASSERT_TRUE(r.lower && r.variational);
    EXPECT_LE(*r.lower, *r.variational);
  }
  EXPECT_TRUE(j["meta"]["isocapacitary_lower_valid"]["valid"].get<bool>());
}

TEST(Run, CollarAudit) {
  TempDir d;
  ASSERT_EQ(call({"collar", "--model", "hyperbolic:2", "--eps", "0.01", "--out", d / "c.json"}), kOk);
  const auto j = nlohmann::json::parse(slurp(d / "c.json"));
  EXPECT_NEAR(j["normalized_upper"].get<double>(), 8 * pi, 0.02 * 8 * pi);
  EXPECT_TRUE(j["height_bounds"]["pass"].get<bool>());
  EXPECT_EQ(call({"audit", "--audit", "upper", "--model", "fermi:2:1"}), kOk);
  EXPECT_EQ(call({"audit", "--audit", "height", "--model", "fermi:2:1"}), kOk);
}

TEST(Run, EinsteinAudit) {
  std::string text;
  EXPECT_EQ(call({"audit", "--audit", "einstein", "--model", "ads:1", "--samples", "4", "--seed", "3"}, &text), kOk);
  EXPECT_NE(text.find("pass"), std::string::npos);
}

// The rest drive the installed binary, as CI would.

TEST(Binary, FermiLipschitzSeed7) {
  TempDir d;
  ASSERT_EQ(run_binary("audit --audit lipschitz --model '{\"model\":\"fermi\",\"n\":2,\"lambda\":1}' --seed 7 --out " +
                  (d / "a.json")),
            0);
  const auto j = nlohmann::json::parse(slurp(d / "a.json"));
  EXPECT_LE(j["max_ratio"].get<double>(), 2.0);
  EXPECT_GE(j["entries"].size(), 50u);
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST(Binary, ByteIdenticalReruns) {
  TempDir d;
  for (const char* f : {"1.json", "2.json"}) {
    ASSERT_EQ(run_binary("audit --audit rigidity --model fermi:2:1 --samples 12 --seed 11 --out " + (d / f)), 0);
  }
  EXPECT_EQ(slurp(d / "1.json"), slurp(d / "2.json"));
  ::setenv("AHGEO_THREADS", "1", 1);
  ASSERT_EQ(run_binary("audit --audit rigidity --model fermi:2:1 --samples 12 --seed 11 --out " + (d / "3.json")), 0);
  ::unsetenv("AHGEO_THREADS");
  EXPECT_EQ(slurp(d / "1.json"), slurp(d / "3.json"));
  ASSERT_EQ(run_binary("audit --audit rigidity --model fermi:2:1 --samples 12 --seed 12 --out " + (d / "4.json")), 0);
  EXPECT_NE(slurp(d / "1.json"), slurp(d / "4.json"));
}

TEST(Binary, AdsCapacitySweep) {
  TempDir d;
  ASSERT_EQ(run_binary("capacity --model '{\"model\":\"ads\",\"m\":1}' --p 2 --t-grid 2:12:1 --format csv --out " +
                  (d / "c.csv")),
            0);
  std::istringstream in(slurp(d / "c.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,lower,variational,upper,ratio,sandwich");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "true") << line;
  }
  EXPECT_EQ(rows, 11);
}

TEST(Binary, ExitCodes) {
  TempDir d;
  EXPECT_EQ(run_binary("relvol --model ads:1 --out /nonexistent-dir/x.json"), 2);
  EXPECT_EQ(run_binary("relvol --model '{\"model\":\"torus\"}'"), 2);
  // A hopeless ODE tolerance makes the Busemann limit fail to settle.
  EXPECT_EQ(run_binary("relvol --model ads:1 --point 0.5 --tol-ode 1 --out " + (d / "r.json")), 3);
  EXPECT_TRUE(fs::exists(d / "r.json.diagnostics.json"));
  EXPECT_FALSE(fs::exists(d / "r.json"));
  const auto diag = nlohmann::json::parse(slurp(d / "r.json.diagnostics.json"));
  EXPECT_TRUE(diag.contains("error"));
  EXPECT_EQ(diag["config"]["tol_ode"], 1.0);
}
