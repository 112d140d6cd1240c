#pragma once

// Run configuration and the SNR sweep driver behind the command-line tool.
//
// SNR convention: the power budget is fixed to P = N_t, so
//     snr = trace(power^2) / (N_r sigma^2) = N_t / (N_r sigma^2)
// and each SNR point uses sigma^2 = N_t / (N_r 10^(snr_db / 10)).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mimoshape/baselines.hpp"
#include "mimoshape/channels.hpp"

#ifndef MIMOSHAPE_VERSION
#define MIMOSHAPE_VERSION "0.0.0"
#endif

namespace mimoshape {

inline constexpr const char* kVersion = MIMOSHAPE_VERSION;

/// Invalid configuration; what() starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"equal", "waterfilling-gaussian-capacity", "uniform-precoder", "joint",
                                              "mercury"};
  return names;
}

struct SweepConfig {
  std::string channel = "constant";  // constant | rayleigh
  int modulation = 16;
  std::vector<double> snr_db;
  std::vector<std::string> strategies = strategy_names();
  std::uint64_t seed = 0;
  std::size_t sample_count = 1000;          // optimizer evaluations
  std::size_t report_sample_count = 10000;  // reported MI values
  std::size_t channel_count = 50;           // rayleigh only
  int rx_antennas = 2;
  int tx_antennas = 2;
  std::optional<bool> normalize_gains;  // unset: true for constant, false for rayleigh
  unsigned threads = 1;
  OptConfig optimizer;

  bool rayleigh() const { return channel == "rayleigh"; }
  bool resolved_normalize() const { return normalize_gains.value_or(!rayleigh()); }
  std::size_t channels() const { return rayleigh() ? channel_count : 1; }
};

/// Checks every field; throws ConfigError naming the field.
inline void validate(const SweepConfig& c) {
  auto fail = [](const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); };
  if (c.channel != "constant" && c.channel != "rayleigh") fail("channel", "must be \"constant\" or \"rayleigh\"");
  if (c.modulation != 4 && c.modulation != 16 && c.modulation != 64 && c.modulation != 256)
    fail("modulation", "must be one of 4, 16, 64, 256");
  if (c.snr_db.empty()) fail("snr_db", "must list at least one SNR point");
  for (std::size_t i = 0; i < c.snr_db.size(); ++i)
    if (!std::isfinite(c.snr_db[i])) fail("snr_db[" + std::to_string(i) + "]", "must be finite");
  if (c.strategies.empty()) fail("strategies", "must list at least one strategy");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < c.strategies.size(); ++i) {
    const auto& s = c.strategies[i];
    const auto& known = strategy_names();
    if (std::find(known.begin(), known.end(), s) == known.end())
      fail("strategies[" + std::to_string(i) + "]", "unknown strategy \"" + s + "\"");
    if (!seen.insert(s).second) fail("strategies[" + std::to_string(i) + "]", "duplicate strategy \"" + s + "\"");
  }
  if (c.sample_count < 1) fail("sample_count", "must be >= 1 (Monte-Carlo sample count)");
  if (c.report_sample_count < 1) fail("report_sample_count", "must be >= 1 (Monte-Carlo sample count)");
  if (c.channel_count < 1) fail("channel_count", "must be >= 1");
  if (c.rx_antennas < 1) fail("rx_antennas", "must be >= 1");
  if (c.tx_antennas < 1) fail("tx_antennas", "must be >= 1");
  if (c.channel == "constant" && (c.rx_antennas != 2 || c.tx_antennas != 2))
    fail("channel", "the constant channel is 2x2");
  const double k = std::pow(static_cast<double>(c.modulation), std::min(c.rx_antennas, c.tx_antennas));
  if (k > 65536.0) fail("modulation", "joint constellation larger than 65536 vectors");
  try {
    validate(c.optimizer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& path, bool ok,
                                     const char* expected) {
  if (!ok) throw ConfigError(path + ": expected " + expected + ", got " + j.dump());
  return j;
}

inline double get_double(const nlohmann::json& j, const std::string& path) {
  require(j, path, j.is_number(), "a number");
  return j.get<double>();
}

inline std::int64_t get_int(const nlohmann::json& j, const std::string& path) {
  require(j, path, j.is_number_integer(), "an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t get_u64(const nlohmann::json& j, const std::string& path) {
  require(j, path, j.is_number_unsigned(), "a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline std::size_t get_count(const nlohmann::json& j, const std::string& path) {
  const auto v = get_int(j, path);
  if (v < 0) throw ConfigError(path + ": must be >= 1 (Monte-Carlo sample count)");
  return static_cast<std::size_t>(v);
}

inline bool get_bool(const nlohmann::json& j, const std::string& path) {
  require(j, path, j.is_boolean(), "true or false");
  return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& path) {
  require(j, path, j.is_string(), "a string");
  return j.get<std::string>();
}

inline void parse_optimizer(const nlohmann::json& j, OptConfig& o) {
  require(j, "optimizer", j.is_object(), "an object");
  for (const auto& [key, v] : j.items()) {
    const std::string path = "optimizer." + key;
    if (key == "armijo_c") o.armijo_c = get_double(v, path);
    else if (key == "armijo_shrink") o.armijo_shrink = get_double(v, path);
    else if (key == "initial_step") o.initial_step = get_double(v, path);
    else if (key == "min_step") o.min_step = get_double(v, path);
    else if (key == "delta_grid_step") o.delta_grid_step = get_double(v, path);
    else if (key == "outer_tol") o.outer_tol = get_double(v, path);
    else if (key == "max_outer") o.max_outer = static_cast<int>(get_int(v, path));
    else if (key == "max_inner") o.max_inner = static_cast<int>(get_int(v, path));
    else if (key == "max_sweeps") o.max_sweeps = static_cast<int>(get_int(v, path));
    else throw ConfigError(path + ": unknown key");
  }
}

}  // namespace detail

/// Parses a JSON run configuration.  Required keys: channel, modulation,
/// snr_db.  Unknown keys are errors.
inline SweepConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("syntax error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>: expected a JSON object");
  for (const char* key : {"channel", "modulation", "snr_db"})
    if (!j.contains(key)) throw ConfigError(std::string(key) + ": required key missing");

  SweepConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "channel") {
      c.channel = detail::get_string(v, key);
    } else if (key == "modulation") {
      c.modulation = static_cast<int>(detail::get_int(v, key));
    } else if (key == "snr_db") {
      detail::require(v, key, v.is_array(), "an array of numbers");
      c.snr_db.clear();
      for (std::size_t i = 0; i < v.size(); ++i)
        c.snr_db.push_back(detail::get_double(v[i], key + "[" + std::to_string(i) + "]"));
    } else if (key == "strategies") {
      detail::require(v, key, v.is_array(), "an array of strategy names");
      c.strategies.clear();
      for (std::size_t i = 0; i < v.size(); ++i)
        c.strategies.push_back(detail::get_string(v[i], key + "[" + std::to_string(i) + "]"));
    } else if (key == "seed") {
      c.seed = detail::get_u64(v, key);
    } else if (key == "sample_count") {
      c.sample_count = detail::get_count(v, key);
    } else if (key == "report_sample_count") {
      c.report_sample_count = detail::get_count(v, key);
    } else if (key == "channel_count") {
      c.channel_count = detail::get_count(v, key);
    } else if (key == "rx_antennas") {
      c.rx_antennas = static_cast<int>(detail::get_int(v, key));
    } else if (key == "tx_antennas") {
      c.tx_antennas = static_cast<int>(detail::get_int(v, key));
    } else if (key == "normalize_gains") {
      c.normalize_gains = detail::get_bool(v, key);
    } else if (key == "warm_start_waterfilling") {
      c.optimizer.warm_start_waterfilling = detail::get_bool(v, key);
    } else if (key == "threads") {
      const auto t = detail::get_int(v, key);
      if (t < 0) throw ConfigError("threads: must be >= 0 (0 = all cores)");
      c.threads = static_cast<unsigned>(t);
    } else if (key == "optimizer") {
      detail::parse_optimizer(v, c.optimizer);
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }
  validate(c);
  return c;
}

/// Fully resolved configuration, as recorded in the run manifest.
inline nlohmann::json to_json(const SweepConfig& c) {
  const auto& o = c.optimizer;
  return {{"channel", c.channel},
          {"modulation", c.modulation},
          {"snr_db", c.snr_db},
          {"strategies", c.strategies},
          {"seed", c.seed},
          {"sample_count", c.sample_count},
          {"report_sample_count", c.report_sample_count},
          {"channel_count", c.channels()},
          {"rx_antennas", c.rx_antennas},
          {"tx_antennas", c.tx_antennas},
          {"normalize_gains", c.resolved_normalize()},
          {"warm_start_waterfilling", o.warm_start_waterfilling},
          {"threads", c.threads},
          {"optimizer",
           {{"armijo_c", o.armijo_c},
            {"armijo_shrink", o.armijo_shrink},
            {"initial_step", o.initial_step},
            {"min_step", o.min_step},
            {"delta_grid_step", o.delta_grid_step},
            {"outer_tol", o.outer_tol},
            {"max_outer", o.max_outer},
            {"max_inner", o.max_inner},
            {"max_sweeps", o.max_sweeps}}}};
}

/// Parses "start:stop:step" (inclusive, to within step/1e6) or "a,b,c".
inline std::vector<double> parse_snr_list(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw ConfigError("snr: cannot parse \"" + s + "\"");
    return v;
  };
  std::vector<std::string> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::size_t pos = 0;
  for (;;) {
    const auto next = text.find(sep, pos);
    parts.push_back(text.substr(pos, next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  std::vector<double> out;
  if (sep == ':') {
    if (parts.size() != 3) throw ConfigError("snr: range form is start:stop:step");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw ConfigError("snr: need step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-6));
    for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * step);
  } else {
    for (const auto& p : parts) out.push_back(number(p));
  }
  if (out.empty()) throw ConfigError("snr: empty list");
  return out;
}

inline double noise_variance_for_snr(double snr_db, int rx, int tx) {
  return static_cast<double>(tx) / (static_cast<double>(rx) * std::pow(10.0, snr_db / 10.0));
}

struct ResultRow {
  std::string strategy;
  double snr_db = 0.0;
  std::size_t channel_index = 0;
  MiValue mi;
  double power_fraction_strong = 0.0;
  std::optional<double> entropy_bits;  // unset for Gaussian inputs
  std::vector<double> delta, lambda;   // empty for Gaussian inputs
  std::vector<StepRecord> steps;       // optimizer trace (same-seed MI), optimized strategies only
};

/// Everything computed for one (SNR, channel) pair.
struct PointResult {
  std::size_t snr_index = 0;
  std::size_t channel_index = 0;
  std::vector<ResultRow> rows;  // in config.strategies order
};

/// Seeds shared by every strategy at one channel, so all curves of a channel
/// see the same noise draws (at every SNR, up to scaling).
struct PointSeeds {
  std::uint64_t optimize;
  std::uint64_t report;
};

inline PointSeeds point_seeds(std::uint64_t seed, std::size_t channel_index) {
  return {derive_key(seed, {0x6f7074ULL, channel_index}), derive_key(seed, {0x7265706f7274ULL, channel_index})};
}

inline PhysicalChannel sweep_channel(const SweepConfig& c, std::size_t channel_index) {
  if (c.rayleigh()) return rayleigh_sample(c.rx_antennas, c.tx_antennas, c.seed, channel_index);
  return constant_channel();
}

inline EquivalentChannel sweep_equivalent(const SweepConfig& c, std::size_t channel_index, double snr_db) {
  RVector gains = svd_reduce(sweep_channel(c, channel_index)).gains;
  if (c.resolved_normalize()) gains = normalize_gains(gains, c.tx_antennas);
  return make_equivalent_channel(gains, noise_variance_for_snr(snr_db, c.rx_antennas, c.tx_antennas));
}

namespace detail {

inline ResultRow discrete_row(const std::string& name, const EquivalentChannel& eq, const PrecoderState& prec,
                              const std::vector<AntennaShaping>& shapings, const McConfig& report) {
  ResultRow r;
  r.strategy = name;
  const auto joint = build_joint(shapings);
  r.mi = estimate_mi(eq, prec, joint, report);
  r.power_fraction_strong = prec.power[0] * prec.power[0] / prec.budget;
  r.entropy_bits = input_entropy(joint);
  for (const auto& s : shapings) {
    r.delta.push_back(s.delta);
    r.lambda.push_back(s.lambda);
  }
  return r;
}

}  // namespace detail

/// Runs every configured strategy at one (SNR, channel) pair.
inline PointResult run_point(const SweepConfig& c, std::size_t snr_index, std::size_t channel_index) {
  const double snr = c.snr_db.at(snr_index);
  const auto eq = sweep_equivalent(c, channel_index, snr);
  const double budget = static_cast<double>(c.tx_antennas);
  const auto seeds = point_seeds(c.seed, channel_index);
  const McConfig opt{c.sample_count, seeds.optimize, 1};
  const McConfig report{c.report_sample_count, seeds.report, 1};
  const auto start = initial_joint_state(eq, c.modulation, budget, false);

  PointResult out{snr_index, channel_index, {}};
  for (const auto& name : c.strategies) {
    ResultRow row;
    if (name == "equal") {
      row = detail::discrete_row(name, eq, start.precoder, start.shapings, report);
    } else if (name == "waterfilling-gaussian-capacity") {
      const RVector p = waterfilling(eq.gains, budget, eq.noise_variance);
      row.strategy = name;
      row.mi = {gaussian_capacity(eq.gains, p, eq.noise_variance), 0.0};
      row.power_fraction_strong = p[0] * p[0] / budget;
    } else if (name == "uniform-precoder") {
      const auto rep = uniform_input_precoder(eq, c.modulation, budget, opt, c.optimizer);
      row = detail::discrete_row(name, eq, rep.precoder, rep.shapings, report);
      row.steps = rep.steps;
    } else if (name == "joint") {
      const auto init = initial_joint_state(eq, c.modulation, budget, c.optimizer.warm_start_waterfilling);
      const auto rep = joint_optimize(eq, init, opt, c.optimizer);
      row = detail::discrete_row(name, eq, rep.precoder, rep.shapings, report);
      row.steps = rep.steps;
    } else if (name == "mercury") {
      // Deterministic: with identity rotation the streams decouple and the
      // MI is the sum of the scalar oracle values.
      const auto m = mercury_waterfilling(eq.gains, budget, eq.noise_variance, c.modulation);
      const auto shaping = uniform_shaping(c.modulation);
      row.strategy = name;
      double bits = 0.0;
      for (Eigen::Index i = 0; i < eq.streams(); ++i)
        bits += mi_oracle_1d(eq.gains[i], m.power[i], shaping, eq.noise_variance);
      row.mi = {bits, 0.0};
      row.power_fraction_strong = m.power[0] * m.power[0] / budget;
      row.entropy_bits = static_cast<double>(eq.streams()) * std::log2(static_cast<double>(c.modulation));
      row.delta.assign(static_cast<std::size_t>(eq.streams()), shaping.delta);
      row.lambda.assign(static_cast<std::size_t>(eq.streams()), 0.0);
    }
    row.snr_db = snr;
    row.channel_index = channel_index;
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// CSV rows ordered by (strategy, snr, channel).
inline void write_csv(std::ostream& os, const SweepConfig& c, const std::vector<PointResult>& points) {
  const int streams = std::min(c.rx_antennas, c.tx_antennas);
  os << "strategy,snr_db,channel_index,mi_bits,mi_stderr,power_fraction_strong,entropy_bits";
  for (int j = 1; j <= streams; ++j) os << ",delta_" << j;
  for (int j = 1; j <= streams; ++j) os << ",lambda_" << j;
  os << '\n';
  std::vector<const PointResult*> order;
  for (const auto& p : points) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const PointResult* a, const PointResult* b) {
    return a->snr_index != b->snr_index ? a->snr_index < b->snr_index : a->channel_index < b->channel_index;
  });
  for (std::size_t s = 0; s < c.strategies.size(); ++s)
    for (const auto* p : order) {
      const auto& r = p->rows.at(s);
      os << r.strategy << ',' << format_number(r.snr_db) << ',' << r.channel_index << ','
         << format_number(r.mi.bits) << ',' << format_number(r.mi.std_error) << ','
         << format_number(r.power_fraction_strong) << ',';
      if (r.entropy_bits) os << format_number(*r.entropy_bits);
      for (int j = 0; j < streams; ++j) {
        os << ',';
        if (static_cast<std::size_t>(j) < r.delta.size()) os << format_number(r.delta[static_cast<std::size_t>(j)]);
      }
      for (int j = 0; j < streams; ++j) {
        os << ',';
        if (static_cast<std::size_t>(j) < r.lambda.size()) os << format_number(r.lambda[static_cast<std::size_t>(j)]);
      }
      os << '\n';
    }
}

/// Per-(strategy, snr) averages over the channels present in `points`.
/// mi_sem is the standard error of the mean across channels.
inline void write_average_csv(std::ostream& os, const SweepConfig& c, const std::vector<PointResult>& points) {
  os << "strategy,snr_db,channel_count,mi_bits_mean,mi_sem,mi_stderr_mean,power_fraction_strong_mean\n";
  for (std::size_t s = 0; s < c.strategies.size(); ++s)
    for (std::size_t k = 0; k < c.snr_db.size(); ++k) {
      std::vector<const PointResult*> at;
      for (const auto& p : points)
        if (p.snr_index == k) at.push_back(&p);
      if (at.empty()) continue;
      std::sort(at.begin(), at.end(),
                [](const PointResult* a, const PointResult* b) { return a->channel_index < b->channel_index; });
      const double n = static_cast<double>(at.size());
      double mean = 0.0, se = 0.0, frac = 0.0;
      for (const auto* p : at) {
        mean += p->rows[s].mi.bits;
        se += p->rows[s].mi.std_error;
        frac += p->rows[s].power_fraction_strong;
      }
      mean /= n;
      double var = 0.0;
      for (const auto* p : at) var += (p->rows[s].mi.bits - mean) * (p->rows[s].mi.bits - mean);
      const double sem = at.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
      os << c.strategies[s] << ',' << format_number(c.snr_db[k]) << ',' << at.size() << ','
         << format_number(mean) << ',' << format_number(sem) << ',' << format_number(se / n) << ','
         << format_number(frac / n) << '\n';
    }
}

struct SweepOutcome {
  std::vector<PointResult> points;  // completed (SNR, channel) pairs, task order
  bool complete = false;
};

/// Evaluates all (SNR, channel) pairs, SNR-major.  When *stop becomes true
/// no new pair is started and the completed prefix is returned.
/// `progress` is called on the calling thread after each completed pair.
template <class Progress>
SweepOutcome run_sweep(const SweepConfig& c, const std::atomic<bool>* stop, Progress&& progress) {
  validate(c);
  const std::size_t channels = c.channels();
  const std::size_t total = c.snr_db.size() * channels;
  SweepOutcome out;
  auto stopped = [&] { return stop != nullptr && stop->load(); };
  ordered_parallel<PointResult>(
      total, c.threads, [&](std::size_t t) { return run_point(c, t / channels, t % channels); },
      [&](PointResult r) {
        out.points.push_back(std::move(r));
        progress(out.points.back(), out.points.size(), total);
      },
      stopped);
  out.complete = out.points.size() == total;
  return out;
}

inline SweepOutcome run_sweep(const SweepConfig& c, const std::atomic<bool>* stop = nullptr) {
  return run_sweep(c, stop, [](const PointResult&, std::size_t, std::size_t) {});
}

inline nlohmann::json manifest(const SweepConfig& c, const SweepOutcome& outcome, const std::vector<std::string>& files) {
  return {{"tool", "mimoshape"},
          {"version", kVersion},
          {"seed", c.seed},
          {"config", to_json(c)},
          {"snr_mapping",
           {{"power_budget", "P = N_t"},
            {"noise_variance", "sigma^2 = N_t / (N_r * 10^(snr_db / 10))"},
            {"note", "trace(power^2) = P holds for every precoder, so snr = P / (N_r sigma^2)"}}},
          {"complete", outcome.complete},
          {"points_completed", outcome.points.size()},
          {"points_total", c.snr_db.size() * c.channels()},
          {"files", files}};
}

}  // namespace mimoshape
