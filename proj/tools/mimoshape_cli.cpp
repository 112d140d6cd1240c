// mimoshape: MI curves for shaped-constellation MIMO precoding.
//
//   mimoshape sweep    --snr 0:20:2 --out results/constant
//   mimoshape rayleigh --snr 6,10,14 --channels 20 --out results/rayleigh
//   mimoshape shape    --snr 10

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mimoshape/sweep.hpp"

namespace fs = std::filesystem;
using namespace mimoshape;

namespace {

std::atomic<bool> g_interrupted{false};
static_assert(std::atomic<bool>::is_always_lock_free);

extern "C" void on_signal(int) { g_interrupted.store(true); }

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> report_samples;
  std::optional<std::size_t> channels;
  std::optional<int> modulation;
  std::optional<unsigned> threads;
  std::string out = "results";
  std::string strategies;
  std::string snr;
  bool quiet = false;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed; all randomness derives from it");
  app->add_option("--samples", f.samples, "Monte-Carlo samples per optimizer evaluation");
  app->add_option("--report-samples", f.report_samples, "Monte-Carlo samples per reported MI value");
  app->add_option("--modulation", f.modulation, "QAM order (4, 16, 64, 256)");
  app->add_option("--threads", f.threads, "worker threads, 0 = all cores");
  app->add_option("--strategies", f.strategies,
                  "comma list of equal, waterfilling-gaussian-capacity, uniform-precoder, joint, mercury");
  app->add_option("--snr", f.snr, "SNR points in dB: start:stop:step or a,b,c");
  app->add_flag("-q,--quiet", f.quiet, "no progress output");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

SweepConfig resolve(const Flags& f, const std::string& channel, const char* default_snr) {
  SweepConfig c;
  if (!f.config_path.empty()) {
    c = parse_config(read_file(f.config_path));
  } else {
    c.snr_db = parse_snr_list(default_snr);
  }
  if (!channel.empty()) c.channel = channel;
  if (f.seed) c.seed = *f.seed;
  if (f.samples) c.sample_count = *f.samples;
  if (f.report_samples) c.report_sample_count = *f.report_samples;
  if (f.channels) c.channel_count = *f.channels;
  if (f.modulation) c.modulation = *f.modulation;
  if (f.threads) c.threads = *f.threads;
  if (!f.strategies.empty()) c.strategies = split_list(f.strategies);
  if (!f.snr.empty()) c.snr_db = parse_snr_list(f.snr);
  validate(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int run(const SweepConfig& c, const Flags& f, bool averaged) {
  fs::create_directories(f.out);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto outcome = run_sweep(c, &g_interrupted, [&](const PointResult& p, std::size_t done, std::size_t total) {
    if (f.quiet) return;
    std::fprintf(stderr, "[%zu/%zu] snr %g dB, channel %zu:", done, total, c.snr_db[p.snr_index], p.channel_index);
    for (const auto& r : p.rows) std::fprintf(stderr, " %s=%.4f", r.strategy.c_str(), r.mi.bits);
    std::fputc('\n', stderr);
  });

  std::vector<std::string> files;
  const std::string main_name = averaged ? "per_channel.csv" : "results.csv";
  std::ostringstream csv;
  write_csv(csv, c, outcome.points);
  write_text(fs::path(f.out) / main_name, csv.str());
  files.push_back(main_name);
  if (averaged) {
    std::ostringstream avg;
    write_average_csv(avg, c, outcome.points);
    write_text(fs::path(f.out) / "average.csv", avg.str());
    files.emplace_back("average.csv");
  }
  write_text(fs::path(f.out) / "manifest.json", manifest(c, outcome, files).dump(2) + "\n");
  if (!outcome.complete) {
    std::fprintf(stderr, "interrupted: wrote %zu completed points to %s\n", outcome.points.size(), f.out.c_str());
    return 130;
  }
  if (!f.quiet) std::fprintf(stderr, "wrote %s\n", (fs::path(f.out) / main_name).c_str());
  return 0;
}

int shape(const SweepConfig& c, const Flags& f, std::size_t channel_index) {
  if (c.snr_db.size() != 1) throw ConfigError("snr: shape takes exactly one SNR point");
  const auto eq = sweep_equivalent(c, channel_index, c.snr_db[0]);
  const double budget = static_cast<double>(c.tx_antennas);
  const auto seeds = point_seeds(c.seed, channel_index);
  const auto init = initial_joint_state(eq, c.modulation, budget, c.optimizer.warm_start_waterfilling);
  const auto rep = joint_optimize(eq, init, {c.sample_count, seeds.optimize, c.threads}, c.optimizer);
  const auto joint = build_joint(rep.shapings);
  const auto mi = estimate_mi(eq, rep.precoder, joint, {c.report_sample_count, seeds.report, c.threads});

  nlohmann::json j;
  j["snr_db"] = c.snr_db[0];
  j["noise_variance"] = eq.noise_variance;
  j["gains"] = std::vector<double>(eq.gains.begin(), eq.gains.end());
  j["mi_bits"] = mi.bits;
  j["mi_stderr"] = mi.std_error;
  j["entropy_bits"] = input_entropy(joint);
  j["power"] = std::vector<double>(rep.precoder.power.begin(), rep.precoder.power.end());
  nlohmann::json rot = nlohmann::json::array();
  for (Eigen::Index r = 0; r < rep.precoder.rotation.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < rep.precoder.rotation.cols(); ++k)
      row.push_back({rep.precoder.rotation(r, k).real(), rep.precoder.rotation(r, k).imag()});
    rot.push_back(row);
  }
  j["rotation"] = rot;
  j["outer_iterations"] = rep.outer_iterations;
  for (const auto& s : rep.shapings) {
    nlohmann::json a;
    a["delta"] = s.delta;
    a["lambda"] = s.lambda;
    a["entropy_bits"] = entropy_bits(s.probs);
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < s.alphabet.size(); ++i)
      pts.push_back({{"re", s.alphabet[i].real()}, {"im", s.alphabet[i].imag()}, {"p", s.probs[i]}});
    a["symbols"] = pts;
    j["antennas"].push_back(a);
  }
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_text(fs::path(f.out) / "shape.json", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint precoding and constellation shaping for discrete-input MIMO channels"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Flags sweep_flags, rayleigh_flags, shape_flags;
  auto* sweep = app.add_subcommand("sweep", "MI versus SNR on the constant channel (or the configured channel)");
  add_common(sweep, sweep_flags);
  sweep->add_option("--out", sweep_flags.out, "output directory")->capture_default_str();

  auto* rayleigh = app.add_subcommand("rayleigh", "ensemble-averaged MI over seeded Rayleigh channels");
  add_common(rayleigh, rayleigh_flags);
  rayleigh->add_option("--out", rayleigh_flags.out, "output directory")->capture_default_str();
  rayleigh->add_option("--channels", rayleigh_flags.channels, "ensemble size");

  std::string shape_channel;
  std::size_t shape_index = 0;
  auto* shp = app.add_subcommand("shape", "optimized distribution at one operating point, as JSON");
  add_common(shp, shape_flags);
  shape_flags.out.clear();
  shp->add_option("--out", shape_flags.out, "also write shape.json into this directory");
  shp->add_option("--channel", shape_channel, "constant or rayleigh")
      ->check(CLI::IsMember({"constant", "rayleigh"}));
  shp->add_option("--index", shape_index, "Rayleigh channel index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return run(resolve(sweep_flags, "", "0:20:2"), sweep_flags, false);
    if (rayleigh->parsed()) return run(resolve(rayleigh_flags, "rayleigh", "0:20:2"), rayleigh_flags, true);
    if (shp->parsed()) return shape(resolve(shape_flags, shape_channel, "10"), shape_flags, shape_index);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
