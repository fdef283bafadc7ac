// vpsim: particle simulations of the repulsive Vlasov-Poisson system in
// d >= 4 and checks of their dispersive behaviour.

#include <CLI11.hpp>

#include <vlasov/vlasov.hpp>

int main(int argc, char** argv) {
  CLI::App app{"vpsim - direct-summation Vlasov-Poisson particle runs and dispersion checks"};
  app.require_subcommand(1);

  std::string config, out, csv, json_out;
  std::uint64_t seed = 0;
  int threads = -1;
  std::vector<std::string> checks, columns;
  std::vector<double> window, guides;
  std::string column;
  double alpha = 0.0;

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory and write series.csv, final.snap, summary.json");
  sim->add_option("-c,--config", config, "config file")->required()->check(CLI::ExistingFile);
  auto* sim_out = sim->add_option("-o,--out", out, "output directory");
  auto* sim_seed = sim->add_option("--seed", seed, "override [core] seed");
  sim->add_option("-j,--threads", threads, "worker threads (0: all cores)");

  auto* ver = app.add_subcommand("verify", "run the selected checks and write one JSON report each");
  ver->add_option("-c,--config", config, "config file")->required()->check(CLI::ExistingFile);
  auto* ver_out = ver->add_option("-o,--out", out, "output directory");
  auto* ver_seed = ver->add_option("--seed", seed, "override [core] seed");
  ver->add_option("-j,--threads", threads, "worker threads (0: all cores)");
  ver->add_option("--checks", checks, "comma separated subset of: virial interpolation lrho em le small-data "
                                      "bootstrap scattering profiles")
      ->delimiter(',');

  auto* fit = app.add_subcommand("fit", "fit a power law in t + alpha to one series column");
  fit->add_option("csv", csv, "series CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--column", column, "column name")->required();
  fit->add_option("--window", window, "lo,hi in t")->required()->expected(2)->delimiter(',');
  auto* fit_json = fit->add_option("--json", json_out, "write the fit as JSON");
  auto* fit_alpha = fit->add_option("--alpha", alpha, "override alpha from the embedded config");

  auto* plot = app.add_subcommand("plot", "log-log SVG plots of series columns");
  plot->add_option("csv", csv, "series CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--columns", columns, "columns to plot")->required()->delimiter(',');
  plot->add_option("-o,--out", out, "output directory")->default_val("plots");
  plot->add_option("--guides", guides, "guide slopes, e.g. -3,-4,-2")->delimiter(',')->allow_extra_args(false);
  auto* plot_alpha = plot->add_option("--alpha", alpha, "override alpha from the embedded config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  vlasov::CommandOptions opt;
  opt.threads = threads;
  if (sim->parsed() || ver->parsed()) {
    if (*sim_out || *ver_out) opt.out = out;
    if (*sim_seed || *ver_seed) opt.seed = seed;
    opt.checks = checks;
    return sim->parsed() ? vlasov::cmd_simulate(config, opt) : vlasov::cmd_verify(config, opt);
  }
  if (fit->parsed()) {
    if (!(window[0] < window[1])) {
      std::cerr << "error: --window needs lo < hi\n";
      return 2;
    }
    return vlasov::cmd_fit(csv, column, {window[0], window[1]},
                           *fit_json ? std::optional<std::string>(json_out) : std::nullopt,
                           *fit_alpha ? std::optional<double>(alpha) : std::nullopt, opt);
  }
  return vlasov::cmd_plot(csv, columns, out, guides, *plot_alpha ? std::optional<double>(alpha) : std::nullopt, opt);
}
