// Acceptance suite: criteria 1-11 are evaluated once with one worker thread
// and once with eight; criterion 12 compares the two artifact trees byte by
// byte. One PASS/FAIL line per criterion; exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <vlasov/vlasov.hpp>

namespace fs = std::filesystem;
using namespace vlasov;

namespace {

struct Criterion {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void save_series(const fs::path& file, const RunResult& r, const ExperimentConfig& cfg) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  write_series_csv(out, r.records, to_text(cfg));
}

void save_report(const fs::path& file, const std::string& kind, const Json& body, const ExperimentConfig& cfg) {
  write_json(file, envelope(kind, body, to_text(cfg)));
}

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.run.dimension = 4;
  c.run.alpha = 1.0;
  c.run.sampler.count = 4096;
  c.run.schedule = TimeSchedule{1e-2, 1.02, 1.0, 0.05, 100.0, CadenceMode::geometric, 1, 10.0};
  return c;
}

ExperimentConfig fixed_config(int d, std::size_t n, double dt, double t_end, int every) {
  ExperimentConfig c;
  c.run.dimension = d;
  c.run.seed = 11;
  c.run.sampler.count = n;
  c.run.schedule = TimeSchedule{dt, 1.0, 1.0, 0.0, t_end, CadenceMode::every, every, 10.0};
  return c;
}

double max_energy_drift(const RunResult& r) {
  const double h0 = r.records.front().ke + 0.5 * r.records.front().pe;
  double worst = 0.0;
  for (const auto& rec : r.records) worst = std::max(worst, std::abs(rec.ke + 0.5 * rec.pe - h0) / std::abs(h0));
  return worst;
}

Ensemble two_body() {
  return Ensemble(4, 1.0, 0.0, {0.5, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0}, {0.0, 0.3, 0.0, 0.0, 0.0, -0.3, 0.0, 0.0},
                  {0.5, 0.5});
}

std::vector<Criterion> evaluate(const fs::path& dir) {
  std::vector<Criterion> out;
  const double inf = std::numeric_limits<double>::infinity();

  // 1. Free transport.
  {
    Criterion c{1, "free-transport oracle", false, {}};
    auto cfg = reference_config();
    cfg.run.field_enabled = false;
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run(cfg.run);
    const double secs = seconds_since(t0);
    const auto& a = r.records.front();
    double worst = 0.0, resid = 0.0;
    for (const auto& rec : r.records) {
      worst = std::max({worst, std::abs(rec.m0 - a.m0) / a.m0, std::abs(rec.m2 - a.m2) / a.m2, std::abs(rec.mn - a.mn) / a.mn});
      resid = std::max(resid, rec.scatter_resid);
    }
    save_series(dir / "c01_free_transport.csv", r, cfg);
    save_report(dir / "c01_free_transport.json", "acceptance:1",
                Json{{"max_moment_change", worst}, {"max_scatter_resid", resid}, {"records", r.records.size()}}, cfg);
    c.pass = worst <= 1e-12 && resid == 0.0 && secs <= 10.0;
    c.detail = "max rel moment change " + num(worst) + ", max scatter residual " + num(resid) + ", " + num(secs, "%.1f") + " s";
    out.push_back(c);
  }

  // 2. Energy conservation and second order.
  {
    Criterion c{2, "energy conservation", false, {}};
    Json body;
    bool ok = true;
    std::string detail;
    for (const char* name : {"two_body", "n512"}) {
      double drift[2];
      for (int h = 0; h < 2; ++h) {
        const double dt = h == 0 ? 1e-3 : 5e-4;
        auto cfg = fixed_config(4, 512, dt, 10.0, h == 0 ? 100 : 200);
        RunResult r;
        if (std::string(name) == "two_body") {
          cfg.run.softening = 0.1;
          r = run_from(cfg.run, two_body());
        } else {
          r = run(cfg.run);
        }
        drift[h] = max_energy_drift(r);
        save_series(dir / ("c02_" + std::string(name) + (h == 0 ? "_dt1.csv" : "_dt2.csv")), r, cfg);
      }
      const double ratio = drift[0] / drift[1];
      ok = ok && drift[0] <= 1e-4 && drift[1] <= 1e-4 && ratio >= 3.0;
      body[name] = Json{{"drift_dt", drift[0]}, {"drift_half_dt", drift[1]}, {"ratio", ratio}};
      detail += std::string(detail.empty() ? "" : "; ") + name + " drift " + num(drift[0]) + " -> " + num(drift[1]) +
                " (x" + num(ratio, "%.2f") + ")";
    }
    save_report(dir / "c02_energy.json", "acceptance:2", body, fixed_config(4, 512, 1e-3, 10.0, 100));
    c.pass = ok;
    c.detail = detail;
    out.push_back(c);
  }

  // 3. Virial balance (d = 4) and sign of dQ/dt (d = 5).
  {
    Criterion c{3, "virial identity", false, {}};
    const auto cfg4 = fixed_config(4, 512, 1e-2, 10.0, 1);
    const RunResult r4 = run(cfg4.run);
    const auto v4 = check_virial_identity(r4, 1e-3);
    const auto cfg5 = fixed_config(5, 512, 1e-2, 10.0, 5);
    const RunResult r5 = run(cfg5.run);
    const auto v5 = check_virial_identity(r5, 1e-3);
    save_series(dir / "c03_virial_d4.csv", r4, cfg4);
    save_series(dir / "c03_virial_d5.csv", r5, cfg5);
    save_report(dir / "c03_virial_d4.json", "acceptance:3", detail::to_json(v4), cfg4);
    save_report(dir / "c03_virial_d5.json", "acceptance:3", detail::to_json(v5), cfg5);
    c.pass = v4.pass && v5.dq_negative_everywhere;
    c.detail = "d=4 residual " + num(v4.max_pointwise_residual) + ", drift " + num(v4.max_integrated_drift) +
               "; d=5 dQ/dt < 0 at every record: " + (v5.dq_negative_everywhere ? "yes" : "no");
    out.push_back(c);
  }

  // Reference run shared by 4, 5, 6, 8, 9.
  const auto ref_cfg = reference_config();
  const RunResult ref = run(ref_cfg.run);
  save_series(dir / "reference.csv", ref, ref_cfg);
  write_snapshot_file(dir / "reference_final.snap", ref.snapshots.back(), to_text(ref_cfg));
  const auto t = ref.times();
  const double alpha = ref_cfg.run.alpha;
  const int d = ref_cfg.run.dimension;

  {
    Criterion c{4, "field decay", false, {}};
    const auto sup = column(ref.records, [](const auto& r) { return r.sup_e; });
    const auto chk = check_exponent("field_sup", t, sup, alpha, 10.0, 100.0, 1.0 - d - 0.5, 1.0 - d + 0.3);
    save_report(dir / "c04_field_decay.json", "acceptance:4", to_json(chk), ref_cfg);
    c.pass = chk.pass;
    c.detail = "exponent " + num(chk.fit->exponent) + " in [" + num(chk.lo) + ", " + num(chk.hi) + "], R^2 " +
               num(chk.fit->r_squared);
    out.push_back(c);
  }
  {
    Criterion c{5, "density decay", false, {}};
    const auto rho = column(ref.records, [](const auto& r) { return r.rho_sup; });
    const auto chk = check_exponent("density_sup", t, rho, alpha, 10.0, 100.0, -d - 0.5, -d + 0.5);
    save_report(dir / "c05_density_decay.json", "acceptance:5", to_json(chk), ref_cfg);
    c.pass = chk.pass;
    c.detail = "exponent " + num(chk.fit->exponent) + " in [" + num(chk.lo) + ", " + num(chk.hi) + "]";
    out.push_back(c);
  }
  {
    Criterion c{6, "L2 field decay, bounded M2", false, {}};
    const auto rep = check_l2_field_decay(ref.records, alpha, 10.0, 100.0);
    save_report(dir / "c06_l2_decay.json", "acceptance:6",
                Json{{"fit", to_json(rep.fit)}, {"m2_max", rep.m2_max}, {"m2_bound", rep.m2_bound}, {"pass", rep.pass}},
                ref_cfg);
    c.pass = rep.pass;
    c.detail = "exponent " + num(rep.fit->exponent) + " <= -0.7, max M2 " + num(rep.m2_max) + " <= " + num(rep.m2_bound);
    out.push_back(c);
  }
  {
    Criterion c{7, "moment interpolation", false, {}};
    const auto t0 = std::chrono::steady_clock::now();
    const auto suite = moment_interpolation_suite(4, 1000, 97, 1e-12);
    const double secs = seconds_since(t0);
    ExperimentConfig cfg;
    save_report(dir / "c07_interpolation.json", "acceptance:7",
                Json{{"cases", suite.cases.size()}, {"failures", suite.failures}, {"max_ratio", suite.max_ratio}}, cfg);
    c.pass = suite.pass && secs <= 5.0;
    c.detail = std::to_string(suite.cases.size() - suite.failures) + "/" + std::to_string(suite.cases.size()) +
               " cases hold, max ratio " + num(suite.max_ratio, "%.15g") + ", " + num(secs, "%.2f") + " s";
    out.push_back(c);
  }
  {
    Criterion c{8, "scattering", false, {}};
    const auto rep = check_scattering(ref, 5.0, 50.0, 0.5);
    save_report(dir / "c08_scattering.json", "acceptance:8",
                Json{{"lemma_rate", to_json(rep.lemma_rate)}, {"strong_rate", rep.strong_rate},
                     {"meets_strong_rate", rep.meets_strong_rate}},
                ref_cfg);
    c.pass = rep.lemma_rate.pass;
    c.detail = "exponent " + num(rep.lemma_rate.fit->exponent) + " <= -0.5 (rate 2-d = " + num(rep.strong_rate) +
               (rep.meets_strong_rate ? " met)" : " not met, recorded only)");
    out.push_back(c);
  }
  {
    Criterion c{9, "self-similar profiles", false, {}};
    const auto rep = check_profiles(ref, 10.0, 100.0, 4);
    save_report(dir / "c09_profiles.json", "acceptance:9",
                Json{{"t", json_array(rep.t)},
                     {"field_residual", json_array(rep.field_residual)},
                     {"density_residual", json_array(rep.density_residual)},
                     {"current_residual", json_array(rep.current_residual)},
                     {"field_rate", to_json(rep.field_rate)},
                     {"density_rate", to_json(rep.density_rate)},
                     {"current_fit", to_json(rep.current_fit)},
                     {"marginal_fit", to_json(rep.marginal_fit)}},
                ref_cfg);
    c.pass = rep.field_tail_decreasing && rep.density_tail_decreasing && rep.field_rate.pass;
    c.detail = std::string("tails decreasing: field ") + (rep.field_tail_decreasing ? "yes" : "no") + ", density " +
               (rep.density_tail_decreasing ? "yes" : "no") + "; field exponent " + num(rep.field_rate.fit->exponent) +
               " <= -0.35";
    out.push_back(c);
  }
  {
    Criterion c{10, "small-data regime", false, {}};
    auto cfg = reference_config();
    cfg.run.sampler.count = 1024;
    const auto rep = small_data_experiment(cfg.run, 13.0, 1e-2);
    save_series(dir / "c10_small_data.csv", rep.run, cfg);
    save_report(dir / "c10_small_data.json", "acceptance:10",
                Json{{"max_mn", rep.max_mn}, {"field_constant", rep.field_constant},
                     {"moment_derivative_ratio", rep.moment_derivative_ratio}, {"completed", rep.completed},
                     {"pass", rep.pass}},
                cfg);
    c.pass = rep.pass && !rep.run.records.empty() && rep.run.records.back().t == cfg.run.schedule.t_end;
    c.detail = "max M_13 " + num(rep.max_mn) + " <= 0.02, reached t = " +
               num(rep.run.records.empty() ? 0.0 : rep.run.records.back().t) + ", fitted C " + num(rep.field_constant);
    out.push_back(c);
  }
  {
    Criterion c{11, "inverse-Laplacian dilation invariance", false, {}};
    const auto suite = inverse_laplacian_suite(4, 20, 64, 1.5, inf, 5, 0.05);
    Json spreads = Json::array();
    for (const auto& r : suite.clouds) spreads.push_back(r.spread);
    save_report(dir / "c11_laplacian.json", "acceptance:11", Json{{"spread", spreads}, {"max_spread", suite.max_spread}},
                ExperimentConfig{});
    c.pass = suite.pass;
    c.detail = "20 clouds, max ratio spread " + num(suite.max_spread) + " <= 0.05";
    out.push_back(c);
  }
  return out;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

void print(const Criterion& c) {
  std::printf("[%s] criterion %2d  %-38s %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), c.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance-artifacts";
  for (int k = 1; k < argc; ++k)
    if (std::string(argv[k]) == "--out" && k + 1 < argc) out = argv[++k];
  const fs::path a = out / "threads-1", b = out / "threads-8";
  fs::remove_all(a);
  fs::remove_all(b);

  set_thread_count(1);
  const auto first = evaluate(a);
  for (const auto& c : first) print(c);

  set_thread_count(8);
  const auto second = evaluate(b);

  Criterion det{12, "determinism", false, {}};
  const auto fa = read_tree(a), fb = read_tree(b);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : fa) {
    const auto it = fb.find(name);
    if (it == fb.end() || it->second != bytes) {
      ++differing;
      std::printf("  differs: %s\n", name.c_str());
    }
  }
  bool same_status = first.size() == second.size();
  for (std::size_t k = 0; same_status && k < first.size(); ++k) same_status = first[k].pass == second[k].pass;
  det.pass = differing == 0 && fa.size() == fb.size() && same_status && !fa.empty();
  det.detail = std::to_string(fa.size()) + " artifacts compared across thread counts 1 and 8, " +
               std::to_string(differing) + " differ";
  print(det);

  const bool all = det.pass && std::all_of(first.begin(), first.end(), [](const auto& c) { return c.pass; });
  std::printf("acceptance: %s\n", all ? "all criteria pass" : "FAILED");
  return all ? 0 : 1;
}
