// skit: sequential kernelized independence testing by betting.
//
// Subcommands:
//   run         experiment grids from a JSON config -> results.csv
//   stream      test one paired stream (CSV file or stdin) live
//   batch-hsic  batch permutation-HSIC baseline with checkpoint monitoring
//   replay      restore a snapshot and continue feeding it
//
// Exit codes: 0 retain/success, 2 reject (stream/replay), 64 usage,
// 65 data format, 70 internal invariant violated. SKIT_THREADS caps the
// runner's parallelism.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "skit/baselines.hpp"
#include "skit/datagen.hpp"
#include "skit/engine.hpp"
#include "skit/snapshot.hpp"

namespace {

constexpr int kExitRetain = 0;
constexpr int kExitReject = 2;
constexpr int kExitUsage = 64;
constexpr int kExitDataFormat = 65;
constexpr int kExitInternal = 70;

int thread_budget() {
  if (const char* env = std::getenv("SKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

skit::PayoffStrategy parse_payoff(const std::string& name) {
  if (name == "hsic") return skit::PayoffStrategy::Hsic;
  if (name == "coco") return skit::PayoffStrategy::Coco;
  if (name == "kcc") return skit::PayoffStrategy::Kcc;
  if (name == "sym_odd") return skit::PayoffStrategy::SymOdd;
  if (name == "sym_rank") return skit::PayoffStrategy::SymRank;
  if (name == "sym_pred") return skit::PayoffStrategy::SymPred;
  throw CLI::ValidationError("--payoff", "unknown payoff '" + name + "'");
}

skit::BettorState parse_bettor(const std::string& name) {
  if (name == "ons") return skit::OnsState{};
  if (name == "agrapa") return skit::AgrapaState{};
  if (name == "mixture") return skit::MixtureState{};
  if (name.rfind("fixed:", 0) == 0) {
    const double l = std::stod(name.substr(6));
    if (l < 0.0 || l >= 1.0) {
      throw CLI::ValidationError("--bettor", "fixed fraction must lie in [0,1)");
    }
    return skit::FixedState{l};
  }
  throw CLI::ValidationError("--bettor", "unknown bettor '" + name + "'");
}

skit::KernelSpec parse_kernel(const std::string& kind, double bandwidth) {
  if (kind == "rbf") return skit::KernelSpec::rbf(bandwidth);
  if (kind == "laplace") return skit::KernelSpec::laplace(bandwidth);
  if (kind == "linear") return skit::KernelSpec::linear();
  throw CLI::ValidationError("--kernel", "unknown kernel '" + kind + "'");
}

skit::TestSession make_session(skit::PayoffStrategy strategy, const skit::KernelSpec& kx,
                               const skit::KernelSpec& ky, const std::string& bettor,
                               double alpha, std::uint64_t seed, int minibatch) {
  if (strategy == skit::PayoffStrategy::Coco || strategy == skit::PayoffStrategy::Kcc) {
    const auto crit = strategy == skit::PayoffStrategy::Coco
                          ? skit::DependenceCriterion::COCO
                          : skit::DependenceCriterion::KCC;
    return skit::TestSession(strategy, skit::CocoKccState(kx, ky, crit),
                             parse_bettor(bettor), alpha, seed);
  }
  return skit::TestSession(strategy, skit::HsicState(kx, ky), parse_bettor(bettor),
                           alpha, seed, minibatch);
}

// ---------------------------------------------------------------------------
// run: experiment grids
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string scenario{"gaussian"};
  std::vector<double> params{0.0};
  std::string payoff{"hsic"};
  std::string bettor{"ons"};
  double alpha{0.05};
  int runs{10};
  long horizon{2000};  // observations, i.e. 2x betting rounds
  std::uint64_t seed{1};
  int minibatch{2};
  bool trajectories{false};
  std::string output_dir{"."};
  double drift_c{1.0};
  std::optional<skit::KernelSpec> kernel_x, kernel_y;
};

skit::KernelSpec kernel_from_config(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  return parse_kernel(kind, j.value("bandwidth", 1.0));
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw skit::FormatError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw skit::FormatError(path + ": " + e.what());
  }
  RunConfig cfg;
  try {
    if (j.value("schema_version", 1) != 1) {
      throw skit::FormatError(path + ": unsupported schema_version");
    }
    cfg.scenario = j.value("scenario", cfg.scenario);
    if (j.contains("params")) cfg.params = j.at("params").get<std::vector<double>>();
    cfg.payoff = j.value("payoff", cfg.payoff);
    cfg.bettor = j.value("bettor", cfg.bettor);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.runs = j.value("runs", cfg.runs);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.minibatch = j.value("minibatch", cfg.minibatch);
    cfg.trajectories = j.value("trajectories", cfg.trajectories);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.drift_c = j.value("drift_c", cfg.drift_c);
    if (j.contains("kernel_x")) cfg.kernel_x = kernel_from_config(j.at("kernel_x"));
    if (j.contains("kernel_y")) cfg.kernel_y = kernel_from_config(j.at("kernel_y"));
  } catch (const nlohmann::json::exception& e) {
    throw skit::FormatError(path + ": config schema error: " + e.what());
  }
  return cfg;
}

skit::ObservationStream make_scenario_stream(const RunConfig& cfg, double param,
                                             std::uint64_t seed) {
  if (cfg.scenario == "gaussian") return skit::gaussian_stream(param, seed);
  if (cfg.scenario == "spherical") {
    return skit::spherical_stream(static_cast<int>(param), seed);
  }
  if (cfg.scenario == "hard_to_detect") return skit::hard_to_detect_stream(param, seed);
  if (cfg.scenario == "drift_sin") return skit::drift_sin_stream(param, cfg.drift_c, seed);
  if (cfg.scenario == "drift_beta") {
    return skit::drift_beta_stream(static_cast<long>(param), seed);
  }
  throw skit::FormatError("unknown scenario '" + cfg.scenario + "'");
}

// Default bandwidths when the config does not pin kernels: the Gaussian
// scenario uses rate 1/4 on x and 1/(4 (1 + beta^2)) on y (matching the
// generator's marginal variances); everything else uses rate 1/4.
std::pair<skit::KernelSpec, skit::KernelSpec> scenario_kernels(const RunConfig& cfg,
                                                               double param) {
  skit::KernelSpec kx = cfg.kernel_x.value_or(skit::KernelSpec::rbf(0.25));
  skit::KernelSpec ky = cfg.kernel_y.value_or(
      cfg.scenario == "gaussian" && !cfg.kernel_y
          ? skit::KernelSpec::rbf(0.25 / (1.0 + param * param))
          : skit::KernelSpec::rbf(0.25));
  return {kx, ky};
}

struct CellResult {
  bool rejected{false};
  long stop_pairs{0};
  double log_wealth{0.0};
};

int cmd_run(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  const auto strategy = parse_payoff(cfg.payoff);
  parse_bettor(cfg.bettor);  // validate early

  const std::size_t cells = cfg.params.size() * static_cast<std::size_t>(cfg.runs);
  std::vector<CellResult> results(cells);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t pi = cell / cfg.runs;
    const int run = static_cast<int>(cell % cfg.runs);
    const double param = cfg.params[pi];
    const auto [kx, ky] = scenario_kernels(cfg, param);
    const std::uint64_t seed = skit::split_seed(cfg.seed, cell);
    auto stream = make_scenario_stream(cfg, param, seed);
    auto session = make_session(strategy, kx, ky, cfg.bettor, cfg.alpha, seed,
                                cfg.minibatch);
    if (cfg.trajectories) session.set_record_trajectory(true);
    const auto verdict = skit::run_stream(session, stream, cfg.horizon);
    results[cell] = {verdict.rejected, verdict.stopping_time.value_or(0),
                     std::log(std::max(verdict.final_wealth, 1e-300))};
    if (cfg.trajectories) {
      std::ostringstream name;
      name << cfg.output_dir << "/trajectory_" << cfg.scenario << '_' << fmt(param)
           << '_' << run << ".csv";
      std::ofstream out(name.str());
      out << "t,f,lambda,wealth,log_wealth\n";
      for (const auto& r : session.trajectory()) {
        out << r.t << ',' << fmt(r.f) << ',' << fmt(r.lambda) << ',' << fmt(r.wealth)
            << ',' << fmt(r.log_wealth) << '\n';
      }
    }
  };

  const int threads = std::min<int>(thread_budget(), static_cast<int>(cells));
  if (threads <= 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::ofstream out(cfg.output_dir + "/results.csv");
  out << "scenario,param,payoff,bettor,alpha,runs,horizon,rejection_rate,"
         "mean_stop,median_stop,mean_log_wealth,mean_stop_obs\n";
  for (std::size_t pi = 0; pi < cfg.params.size(); ++pi) {
    std::vector<long> stops;
    double log_wealth_sum = 0.0;
    int rejections = 0;
    for (int run = 0; run < cfg.runs; ++run) {
      const auto& r = results[pi * cfg.runs + run];
      log_wealth_sum += r.log_wealth;
      if (r.rejected) {
        ++rejections;
        stops.push_back(r.stop_pairs);
      }
    }
    std::sort(stops.begin(), stops.end());
    double mean_stop = std::numeric_limits<double>::quiet_NaN();
    double median_stop = std::numeric_limits<double>::quiet_NaN();
    if (!stops.empty()) {
      mean_stop = 0.0;
      for (long s : stops) mean_stop += static_cast<double>(s);
      mean_stop /= static_cast<double>(stops.size());
      const std::size_t m = stops.size();
      median_stop = m % 2 == 1 ? static_cast<double>(stops[m / 2])
                               : 0.5 * static_cast<double>(stops[m / 2 - 1] + stops[m / 2]);
    }
    out << cfg.scenario << ',' << fmt(cfg.params[pi]) << ',' << cfg.payoff << ','
        << cfg.bettor << ',' << fmt(cfg.alpha) << ',' << cfg.runs << ',' << cfg.horizon
        << ',' << fmt(static_cast<double>(rejections) / cfg.runs) << ','
        << fmt(mean_stop) << ',' << fmt(median_stop) << ','
        << fmt(log_wealth_sum / cfg.runs) << ',' << fmt(2.0 * mean_stop) << '\n';
  }
  std::cout << "wrote " << cfg.output_dir << "/results.csv (" << cfg.params.size()
            << " rows, " << cells << " runs)\n";
  return kExitRetain;
}

// ---------------------------------------------------------------------------
// stream / replay plumbing
// ---------------------------------------------------------------------------

std::unique_ptr<skit::CsvStream> open_csv(const std::string& input,
                                          const std::vector<std::string>& x_cols,
                                          const std::vector<std::string>& y_cols) {
  const std::string path = input == "-" ? "/dev/stdin" : input;
  return std::make_unique<skit::CsvStream>(path, x_cols, y_cols);
}

int finish_stream(skit::TestSession& session) {
  if (session.stopped()) {
    std::cout << "REJECT@" << *session.stopped() << '\n';
    return kExitReject;
  }
  std::cout << "RETAIN\n";
  return kExitRetain;
}

int cmd_stream(const std::string& payoff, const std::string& bettor, double alpha,
               const std::string& kernel_x, const std::string& kernel_y,
               double bandwidth_x, double bandwidth_y, bool bx_set, bool by_set,
               long median_n, const std::string& input,
               const std::vector<std::string>& x_cols,
               const std::vector<std::string>& y_cols, long snapshot_every,
               const std::string& snapshot_prefix, int minibatch) {
  if (median_n > 0 && (bx_set || by_set)) {
    throw CLI::ValidationError(
        "--median-heuristic-n", "conflicts with explicit --bandwidth-x/--bandwidth-y");
  }
  auto csv = open_csv(input, x_cols, y_cols);

  skit::KernelSpec kx = parse_kernel(kernel_x, bandwidth_x);
  skit::KernelSpec ky = parse_kernel(kernel_y, bandwidth_y);
  if (median_n > 0) {
    // Warmup prefix fixes the bandwidths; testing then starts fresh.
    std::vector<skit::Vector> xs, ys;
    skit::PairedObservation z;
    for (long i = 0; i < median_n; ++i) {
      if (!csv->next(z)) {
        throw skit::FormatError("input ended during the median-heuristic warmup");
      }
      xs.push_back(z.x);
      ys.push_back(z.y);
    }
    if (kernel_x != "linear") kx = {kx.kind, skit::median_heuristic(xs)};
    if (kernel_y != "linear") ky = {ky.kind, skit::median_heuristic(ys)};
    std::cout << "# median-heuristic bandwidths: x=" << fmt(kx.bandwidth)
              << " y=" << fmt(ky.bandwidth) << '\n';
  }

  auto session = make_session(parse_payoff(payoff), kx, ky, bettor, alpha, 0, minibatch);
  skit::PairedObservation z;
  long observations = 0;
  while (!session.stopped() && csv->next(z)) {
    const auto report = session.feed(z);
    ++observations;
    if (report) {
      std::cout << "t=" << report->t << " f=" << fmt(report->f)
                << " lambda=" << fmt(report->lambda)
                << " wealth=" << fmt(report->wealth) << '\n';
    }
    if (snapshot_every > 0 && observations % snapshot_every == 0) {
      std::ofstream snap(snapshot_prefix + std::to_string(observations) + ".json");
      snap << skit::snapshot(session);
    }
  }
  return finish_stream(session);
}

int cmd_batch_hsic(const std::string& input, const std::vector<std::string>& x_cols,
                   const std::vector<std::string>& y_cols, double alpha,
                   int permutations, std::vector<long> checkpoints, bool bonferroni,
                   double bandwidth_x, double bandwidth_y, std::uint64_t seed) {
  auto csv = open_csv(input, x_cols, y_cols);
  auto stream = [&csv, &input] {
    skit::PairedObservation z;
    if (!csv->next(z)) throw skit::FormatError(input + ": fewer rows than checkpoints need");
    return z;
  };
  std::mt19937_64 rng(seed);
  const auto report = skit::continuous_monitor(
      stream, checkpoints, alpha, bonferroni, skit::KernelSpec::rbf(bandwidth_x),
      skit::KernelSpec::rbf(bandwidth_y), permutations, rng);
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    std::cout << "checkpoint=" << checkpoints[i] << " p=" << fmt(report.p_values[i])
              << " threshold=" << fmt(report.thresholds[i])
              << (report.p_values[i] < report.thresholds[i] ? " REJECT" : " retain")
              << '\n';
  }
  if (report.first_rejection) {
    std::cout << "first rejection at checkpoint " << checkpoints[*report.first_rejection]
              << '\n';
    return kExitReject;
  }
  std::cout << "RETAIN\n";
  return kExitRetain;
}

int cmd_replay(const std::string& snapshot_path, const std::string& input,
               const std::vector<std::string>& x_cols,
               const std::vector<std::string>& y_cols) {
  std::ifstream in(snapshot_path);
  if (!in) throw skit::FormatError("cannot open snapshot: " + snapshot_path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto session = skit::restore(buf.str());
  std::cout << "# restored at round " << session.round() << " wealth "
            << fmt(session.wealth()) << '\n';

  auto csv = open_csv(input, x_cols, y_cols);
  skit::PairedObservation z;
  while (!session.stopped() && csv->next(z)) {
    const auto report = session.feed(z);
    if (report) {
      std::cout << "t=" << report->t << " f=" << fmt(report->f)
                << " lambda=" << fmt(report->lambda)
                << " wealth=" << fmt(report->wealth) << '\n';
    }
  }
  return finish_stream(session);
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(thread_budget());

  CLI::App app{"Sequential kernelized independence testing by betting"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  run->add_option("--config", config_path, "JSON config file")->required();

  // stream
  std::string payoff = "hsic", bettor = "ons";
  std::string kernel_x = "rbf", kernel_y = "rbf";
  double alpha = 0.05, bandwidth_x = 0.25, bandwidth_y = 0.25;
  long median_n = 0, snapshot_every = 0;
  std::string input = "-", snapshot_prefix = "snapshot_";
  std::vector<std::string> x_cols{"x"}, y_cols{"y"};
  int minibatch = 2;
  auto* stream = app.add_subcommand("stream", "Test a paired CSV stream sequentially");
  stream->add_option("--payoff", payoff, "hsic|coco|kcc|sym_odd|sym_rank|sym_pred");
  stream->add_option("--bettor", bettor, "ons|agrapa|mixture|fixed:<l>");
  stream->add_option("--alpha", alpha, "significance level");
  stream->add_option("--kernel-x", kernel_x, "rbf|laplace|linear");
  stream->add_option("--kernel-y", kernel_y, "rbf|laplace|linear");
  auto* bx = stream->add_option("--bandwidth-x", bandwidth_x, "rate for the x kernel");
  auto* by = stream->add_option("--bandwidth-y", bandwidth_y, "rate for the y kernel");
  stream->add_option("--median-heuristic-n", median_n,
                     "warmup observations used only for bandwidth selection");
  stream->add_option("--input", input, "CSV path or '-' for stdin");
  stream->add_option("--x-cols", x_cols, "x column names");
  stream->add_option("--y-cols", y_cols, "y column names");
  stream->add_option("--snapshot-every", snapshot_every, "snapshot period (observations)");
  stream->add_option("--snapshot-prefix", snapshot_prefix, "snapshot file prefix");
  stream->add_option("--minibatch", minibatch, "observations per betting round (HSIC)");

  // batch-hsic
  std::string b_input = "-";
  std::vector<std::string> b_x_cols{"x"}, b_y_cols{"y"};
  double b_alpha = 0.05, b_bx = 0.25, b_by = 0.25;
  int permutations = 200;
  std::vector<long> checkpoints{100};
  bool bonferroni = false;
  std::uint64_t b_seed = 1;
  auto* batch = app.add_subcommand("batch-hsic", "Batch permutation HSIC with monitoring");
  batch->add_option("--input", b_input, "CSV path or '-' for stdin");
  batch->add_option("--x-cols", b_x_cols, "x column names");
  batch->add_option("--y-cols", b_y_cols, "y column names");
  batch->add_option("--alpha", b_alpha, "significance level");
  batch->add_option("--permutations", permutations, "permutation count M");
  batch->add_option("--checkpoints", checkpoints, "sample sizes to test at");
  batch->add_flag("--bonferroni", bonferroni, "alpha / (i(i+1)) correction");
  batch->add_option("--bandwidth-x", b_bx, "RBF rate for x");
  batch->add_option("--bandwidth-y", b_by, "RBF rate for y");
  batch->add_option("--seed", b_seed, "permutation RNG seed");

  // replay
  std::string snapshot_path, r_input = "-";
  std::vector<std::string> r_x_cols{"x"}, r_y_cols{"y"};
  auto* replay = app.add_subcommand("replay", "Continue a session from a snapshot");
  replay->add_option("--snapshot", snapshot_path, "snapshot JSON file")->required();
  replay->add_option("--input", r_input, "CSV path or '-' for stdin");
  replay->add_option("--x-cols", r_x_cols, "x column names");
  replay->add_option("--y-cols", r_y_cols, "y column names");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path);
    if (stream->parsed()) {
      return cmd_stream(payoff, bettor, alpha, kernel_x, kernel_y, bandwidth_x,
                        bandwidth_y, bx->count() > 0, by->count() > 0, median_n, input,
                        x_cols, y_cols, snapshot_every, snapshot_prefix, minibatch);
    }
    if (batch->parsed()) {
      return cmd_batch_hsic(b_input, b_x_cols, b_y_cols, b_alpha, permutations,
                            checkpoints, bonferroni, b_bx, b_by, b_seed);
    }
    if (replay->parsed()) return cmd_replay(snapshot_path, r_input, r_x_cols, r_y_cols);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const skit::FormatError& e) {
    std::cerr << "data format error: " << e.what() << '\n';
    return kExitDataFormat;
  } catch (const skit::DegenerateDataError& e) {
    std::cerr << "degenerate data: " << e.what() << '\n';
    return kExitDataFormat;
  } catch (const skit::InternalInvariantError& e) {
    std::cerr << "internal invariant violated: " << e.what() << '\n';
    return kExitInternal;
  } catch (const skit::InputError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}
