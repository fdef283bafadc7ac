#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <vlasov/vlasov.hpp>

namespace fs = std::filesystem;
using namespace vlasov;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vpsim-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

const char* kSmall =
    "[core]\ndimension = 4\nalpha = 1\nseed = 3\n"
    "[sampler]\ncount = 24\n"
    "[dynamics]\ndt0 = 0.1\nt_end = 0.5\n";

struct Quiet {
  std::ostringstream log, err;
  CommandOptions opt(std::optional<std::string> out = std::nullopt) {
    CommandOptions o;
    o.out = std::move(out);
    o.log = &log;
    o.err = &err;
    return o;
  }
};

DiagnosticsRecord record(double t, double v) {
  DiagnosticsRecord r;
  r.t = t;
  r.m0 = 1.0;
  r.m2 = v;
  r.mn = 1.0 / 3.0;
  r.sup_e = v;
  return r;
}

}  // namespace

TEST(Config, CanonicalTextRoundTrips) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    ExperimentConfig c;
    c.run.dimension = 3 + static_cast<int>(u(gen) * 5);
    c.run.alpha = u(gen) * 3.0;
    c.run.seed = gen();
    c.run.sampler.count = 1 + static_cast<std::size_t>(u(gen) * 1000);
    c.run.sampler.kind = static_cast<SamplerKind>(k % 3);
    c.run.field_enabled = k % 2 == 0;
    if (k % 3 == 0) c.run.softening = u(gen);
    c.run.schedule.dt0 = 1e-3 + u(gen);
    c.run.schedule.t_end = 10.0 * u(gen);
    c.verify.le_q = k % 4 == 0 ? std::numeric_limits<double>::infinity() : 10.0 + u(gen);
    c.verify.decay_window = {u(gen), 1.0 + u(gen)};
    c.verify.checks = {"virial", "le"};
    const std::string text = to_text(c);
    const auto back = parse_config(text);
    EXPECT_EQ(to_text(back), text);
    EXPECT_EQ(back.run.seed, c.run.seed);
    EXPECT_EQ(back.run.alpha, c.run.alpha);
    EXPECT_EQ(back.verify, c.verify);
  }
}

TEST(Config, DefaultsAndComments) {
  const auto c = parse_config("# comment\n[core]\ndimension = 5 # trailing\n");
  EXPECT_EQ(c.run.dimension, 5);
  EXPECT_EQ(c.run.alpha, 1.0);
  EXPECT_EQ(parse_config("[dynamics]\nfield_disabled = true\n").run.field_enabled, false);
}

TEST(Config, ReportsLineAndField) {
  auto expect = [](const std::string& text, int line, const std::string& field) {
    try {
      parse_config(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.line, line) << e.what();
      EXPECT_EQ(e.field, field) << e.what();
    }
  };
  expect("[core]\ndimension = 4\ncolour = red\n", 3, "core.colour");
  expect("[core]\n\n[nonsense]\n", 3, "nonsense");
  expect("[core]\nalpha = 1\nalpha = 2\n", 3, "core.alpha");
  expect("[core]\nalpha = fast\n", 2, "core.alpha");
  expect("[sampler]\ncount = 12x\n", 2, "sampler.count");
  expect("seed = 4\n", 1, "seed");
  expect("[verify]\nchecks = virial, nonsense\n", 2, "verify.checks");
  expect("[core]\ndimension = 1\n", 0, "core.dimension");
}

TEST(Csv, HeaderAndBitwiseRoundTrip) {
  std::vector<DiagnosticsRecord> recs{record(0.0, 1.0 / 3.0), record(0.1, std::nextafter(1.0, 2.0)),
                                      record(1e300, 5e-324)};
  std::stringstream ss;
  write_series_csv(ss, recs, "[core]\nalpha = 1\n");
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "# format = vpsim-1");
  std::getline(ss, line);
  EXPECT_EQ(line, "# config: [core]");
  std::getline(ss, line);
  std::getline(ss, line);
  EXPECT_EQ(line, "t,M0,M2,Mn,sup_E,pe,ke,R_max,rho_sup,escaped_frac,scatter_resid");
  ss.seekg(0);
  const auto table = read_series_csv(ss);
  ASSERT_EQ(table.rows(), 3u);
  EXPECT_EQ(table.config_text, "[core]\nalpha = 1\n");
  for (std::size_t k = 0; k < recs.size(); ++k) {
    EXPECT_EQ(table.column("t")[k], recs[k].t);
    EXPECT_EQ(table.column("M2")[k], recs[k].m2);
    EXPECT_EQ(table.column("Mn")[k], recs[k].mn);
  }
  EXPECT_EQ(table.row_lines[0], 5);
  EXPECT_THROW(table.column("nope"), FormatError);
}

TEST(Binary, SnapshotRoundTrip) {
  SamplerSpec s;
  s.dim = 3;
  s.count = 17;
  const Ensemble e0 = sample_initial(s, 4);
  const Ensemble e(3, 0.5, 2.25, std::vector<double>(e0.positions().begin(), e0.positions().end()),
                   std::vector<double>(e0.velocities().begin(), e0.velocities().end()),
                   std::vector<double>(e0.weights().begin(), e0.weights().end()));
  std::stringstream ss;
  write_snapshot(ss, e);
  EXPECT_EQ(ss.str().size(), 8u + 4 + 4 + 8 + 8 + 8 + 17 * 8 * 7);
  EXPECT_EQ(ss.str().substr(0, 6), "VPSNAP");
  const Ensemble back = read_snapshot(ss);
  EXPECT_EQ(back.dim(), 3);
  EXPECT_EQ(back.time(), 2.25);
  EXPECT_EQ(back.alpha(), 0.5);
  for (std::size_t k = 0; k < e.positions().size(); ++k) {
    EXPECT_EQ(back.positions()[k], e.positions()[k]);
    EXPECT_EQ(back.velocities()[k], e.velocities()[k]);
  }
  std::stringstream bad("VPSNAQ\0\0garbage");
  EXPECT_THROW(read_snapshot(bad), FormatError);

  const auto dir = scratch("snap");
  write_snapshot_file(dir / "a.snap", e, "[core]\n");
  const auto meta = Json::parse(slurp(dir / "a.snap.json"));
  EXPECT_EQ(meta["kind"], "snapshot");
  EXPECT_EQ(meta["report"]["n"], 17);
}

TEST(Binary, GridRoundTrip) {
  SamplerSpec s;
  s.dim = 2;
  s.count = 30;
  const auto g = deposit_density(sample_initial(s, 2), GridSpec{6, 8.0, {}}, 1.0);
  std::stringstream ss;
  write_grid(ss, g);
  const auto back = read_grid(ss);
  EXPECT_EQ(back.cells, g.cells);
  EXPECT_EQ(back.lo, g.lo);
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(back.escaped, g.escaped);
}

TEST(Simulate, ZeroDurationSingleRow) {
  const auto dir = scratch("zero");
  const auto cfg = write_file(dir / "c.ini", "[core]\ndimension = 4\n[sampler]\ncount = 8\n[dynamics]\nt_end = 0\n");
  Quiet q;
  ASSERT_EQ(cmd_simulate(cfg.string(), q.opt((dir / "out").string())), 0) << q.err.str();
  const auto table = read_series_csv((dir / "out" / "series.csv").string());
  EXPECT_EQ(table.rows(), 1u);
  EXPECT_EQ(table.column("t")[0], 0.0);
  EXPECT_TRUE(fs::exists(dir / "out" / "final.snap"));
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
}

TEST(Simulate, ByteIdenticalAcrossRunsAndThreads) {
  const auto dir = scratch("det");
  const auto cfg = write_file(dir / "c.ini", kSmall);
  Quiet q;
  auto o1 = q.opt((dir / "a").string());
  o1.threads = 1;
  auto o2 = q.opt((dir / "b").string());
  o2.threads = 1;
  auto o3 = q.opt((dir / "c").string());
  o3.threads = 4;
  ASSERT_EQ(cmd_simulate(cfg.string(), o1), 0);
  ASSERT_EQ(cmd_simulate(cfg.string(), o2), 0);
  ASSERT_EQ(cmd_simulate(cfg.string(), o3), 0);
  set_thread_count(1);
  for (const char* f : {"series.csv", "final.snap", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
}

TEST(Simulate, FieldDisabledKeepsMoments) {
  const auto dir = scratch("free");
  const auto cfg = write_file(dir / "c.ini", std::string(kSmall) + "field_disabled = true\n");
  Quiet q;
  ASSERT_EQ(cmd_simulate(cfg.string(), q.opt((dir / "out").string())), 0) << q.err.str();
  const auto table = read_series_csv((dir / "out" / "series.csv").string());
  ASSERT_GT(table.rows(), 2u);
  for (const char* c : {"M0", "M2", "Mn"})
    for (double v : table.column(c)) EXPECT_EQ(v, table.column(c)[0]) << c;
  for (double v : table.column("scatter_resid")) EXPECT_EQ(v, 0.0);
}

TEST(Simulate, BadConfigExitsTwo) {
  const auto dir = scratch("bad");
  Quiet q;
  EXPECT_EQ(cmd_simulate(write_file(dir / "c.ini", "[core]\nbogus = 1\n").string(), q.opt()), 2);
  EXPECT_NE(q.err.str().find("core.bogus"), std::string::npos);
  EXPECT_EQ(cmd_simulate((dir / "missing.ini").string(), q.opt()), 2);
}

TEST(Simulate, OutputRootFromEnvironment) {
  const auto dir = scratch("env");
  ExperimentConfig cfg;
  ::setenv(kOutputRootVariable, (dir / "root").c_str(), 1);
  EXPECT_EQ(resolve_output_dir(cfg, CommandOptions{}), dir / "root");
  cfg.run.output_dir = "from-config";
  EXPECT_EQ(resolve_output_dir(cfg, CommandOptions{}), fs::path("from-config"));
  CommandOptions o;
  o.out = "from-flag";
  EXPECT_EQ(resolve_output_dir(cfg, o), fs::path("from-flag"));
  ::unsetenv(kOutputRootVariable);
  EXPECT_EQ(resolve_output_dir(ExperimentConfig{}, CommandOptions{}), fs::path("vpsim-out"));
}

TEST(Verify, VirialOnGeometricScheduleIsRejected) {
  const auto dir = scratch("vgeo");
  const auto cfg = write_file(dir / "c.ini", std::string(kSmall) + "cadence = geometric\n");
  Quiet q;
  auto o = q.opt((dir / "out").string());
  o.checks = {"virial"};
  EXPECT_NE(cmd_verify(cfg.string(), o), 0);
  EXPECT_NE(q.log.str().find("virial: rejected"), std::string::npos) << q.log.str();
  EXPECT_NE(q.log.str().find("fixed-dt required"), std::string::npos);
  const auto j = Json::parse(slurp(dir / "out" / "virial.json"));
  EXPECT_EQ(j["report"]["status"], "rejected");
}

TEST(Verify, InterpolationPasses) {
  const auto dir = scratch("vint");
  const auto cfg = write_file(dir / "c.ini", std::string(kSmall) + "[verify]\ninterpolation_cases = 100\n");
  Quiet q;
  auto o = q.opt((dir / "out").string());
  o.checks = {"interpolation"};
  EXPECT_EQ(cmd_verify(cfg.string(), o), 0) << q.err.str();
  EXPECT_NE(q.log.str().find("interpolation: pass"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "verify.json"));
  o.checks = {"nonsense"};
  EXPECT_EQ(cmd_verify(cfg.string(), o), 2);
}

TEST(Fit, PowerLawConstantAndNonpositive) {
  const auto dir = scratch("fit");
  std::vector<DiagnosticsRecord> recs;
  for (int k = 0; k <= 20; ++k) recs.push_back(record(std::pow(10.0, k / 10.0) - 1.0, 0.0));
  for (auto& r : recs) {
    r.sup_e = 3.0 * std::pow(r.t + 1.0, -3.0);
    r.m2 = 1.0;
  }
  recs[15].m2 = -1.0;
  ExperimentConfig cfg;
  {
    std::ofstream out(dir / "s.csv");
    write_series_csv(out, recs, to_text(cfg));
  }
  Quiet q;
  ASSERT_EQ(cmd_fit((dir / "s.csv").string(), "sup_E", {1.0, 99.0}, (dir / "fit.json").string(), std::nullopt, q.opt()),
            0);
  const auto j = Json::parse(slurp(dir / "fit.json"));
  EXPECT_NEAR(j["report"]["exponent"].get<double>(), -3.0, 1e-10);
  EXPECT_NE(q.log.str().find("exponent -3"), std::string::npos) << q.log.str();
  Quiet q2;
  ASSERT_EQ(cmd_fit((dir / "s.csv").string(), "M0", {1.0, 99.0}, std::nullopt, std::nullopt, q2.opt()), 0);
  EXPECT_NE(q2.log.str().find("exponent 0\n"), std::string::npos) << q2.log.str();
  Quiet q3;
  EXPECT_EQ(cmd_fit((dir / "s.csv").string(), "M2", {1.0, 99.0}, std::nullopt, std::nullopt, q3.opt()), 2);
  EXPECT_NE(q3.err.str().find("row 16"), std::string::npos) << q3.err.str();
  EXPECT_EQ(cmd_fit((dir / "s.csv").string(), "nope", {1.0, 99.0}, std::nullopt, std::nullopt, q3.opt()), 2);
}

TEST(Plot, PolylineGuidesAndMasking) {
  PlotOptions po;
  po.guide_slopes = {-3.0};
  const std::string svg = render_loglog_svg({PlotSeries{"a", {1, 10, 100, 1000}, {1, 1e-3, 0.0, 1e-9}}}, po);
  EXPECT_NE(svg.find("<polyline class=\"data\""), std::string::npos);
  EXPECT_NE(svg.find("<line class=\"guide\""), std::string::npos);
  EXPECT_NE(svg.find("warning: 1 nonpositive point(s) masked"), std::string::npos);
  EXPECT_THROW(render_loglog_svg({}, po), DomainError);

  const auto dir = scratch("plot");
  std::vector<DiagnosticsRecord> recs{record(0.0, 1.0), record(1.0, 0.5), record(3.0, 0.25)};
  {
    std::ofstream out(dir / "s.csv");
    write_series_csv(out, recs, to_text(ExperimentConfig{}));
  }
  Quiet q;
  EXPECT_EQ(cmd_plot((dir / "s.csv").string(), {"sup_E"}, (dir / "p").string(), {-1.0}, std::nullopt, q.opt()), 0);
  EXPECT_TRUE(fs::exists(dir / "p" / "sup_E.svg"));
  EXPECT_EQ(cmd_plot((dir / "s.csv").string(), {}, (dir / "p").string(), {}, std::nullopt, q.opt()), 2);
}

TEST(Binary, HelpRuns) {
  const std::string cmd = std::string(VPSIM_BINARY) + " --help > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string(VPSIM_BINARY) + " simulate --config /nonexistent.ini > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
