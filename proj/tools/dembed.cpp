#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dembed/cli.hpp"

int main(int argc, char** argv) {
  using namespace dembed::cli;
  CLI::App app{"Diversity-embedded coding over fading ISI channels: simulation and verification"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo SNR sweep from a JSON config");
  simulate->add_option("--config", sim.config_path, "JSON sweep configuration")->required();
  simulate->add_option("--set", sim.sets, "Override a config field, KEY=VALUE (repeatable)");
  simulate->add_option("--out", sim.out_dir, "Output directory");
  std::uint64_t seed = 0;
  auto* seed_opt = simulate->add_option("--seed", seed, "Override master_seed");
  simulate->add_option("--workers", sim.workers, "Worker threads (affects speed only)");

  VerifyLemmaOptions lemma;
  std::uint64_t lemma_seed = 1;
  std::string lemma_csv;
  auto* verify = app.add_subcommand("verify-lemma", "Check the frequency-bin structural bound on random channels");
  verify->add_option("--nu", lemma.nus, "Channel memories to check")->delimiter(',');
  verify->add_option("--n-min", lemma.n_min, "Smallest N");
  verify->add_option("--n-max", lemma.n_max, "Largest N");
  verify->add_option("--m-rx", lemma.m_rx, "Receive antenna counts")->delimiter(',');
  verify->add_option("--draws", lemma.draws, "Channel draws per shape");
  verify->add_option("--seed", lemma_seed, "Master seed");
  auto* lemma_csv_opt = verify->add_option("--csv", lemma_csv, "Write violating rows to this CSV");
  verify->add_option("--workers", sim.workers, "Accepted for symmetry; the check is single threaded");

  BoundsOptions bounds;
  std::string bounds_csv;
  auto* bnd = app.add_subcommand("bounds", "Print the diversity brackets for both layers");
  bnd->add_option("--rh", bounds.r_h, "High-layer multiplexing gain r_H")->required();
  bnd->add_option("--rl", bounds.r_l, "Low-layer multiplexing gain r_L");
  bnd->add_option("--n", bounds.n_data, "Data symbols per block N")->required();
  bnd->add_option("--nu", bounds.nu, "Channel memory nu")->required();
  bnd->add_option("--mr", bounds.m_rx, "Receive antennas M_r");
  auto* bounds_csv_opt = bnd->add_option("--csv", bounds_csv, "Also write the table as CSV");

  SlopeOptions slope;
  std::vector<double> window;
  std::string layer = "high";
  auto* slp = app.add_subcommand("slope", "Fit the diversity slope of a curve CSV");
  slp->add_option("csv", slope.csv_path, "Curve CSV written by simulate")->required();
  slp->add_option("--window", window, "Fit window lo,hi in dB")->delimiter(',')->expected(2);
  slp->add_option("--layer", layer, "high or low")->check(CLI::IsMember({"high", "low"}));
  slp->add_option("--tolerance", slope.tolerance, "Allowed distance outside the bracket");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  if (*simulate) {
    if (*seed_opt) sim.seed = seed;
    return cmd_simulate(sim, std::cout, std::cerr);
  }
  if (*verify) {
    lemma.seed = lemma_seed;
    if (*lemma_csv_opt) lemma.csv_path = lemma_csv;
    return cmd_verify_lemma(lemma, std::cout, std::cerr);
  }
  if (*bnd) {
    if (*bounds_csv_opt) bounds.csv_path = bounds_csv;
    return cmd_bounds(bounds, std::cout, std::cerr);
  }
  if (*slp) {
    if (window.size() == 2) slope.window = std::make_pair(window[0], window[1]);
    slope.layer = layer == "low" ? dembed::Layer::low : dembed::Layer::high;
    return cmd_slope(slope, std::cout, std::cerr);
  }
  return kConfigError;
}
