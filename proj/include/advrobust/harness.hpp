#pragma once

/// \file
/// Seeded experiment driver: synthetic distributions, trial records, CSV
/// emission and parsing, per-cell summaries, and a key=value config reader.
///
/// Every trial draws from its own RNG stream, seeded by hashing the master
/// seed with (experiment, d, n, trial). Trials may run on several threads;
/// records land in preallocated slots so the output never depends on
/// scheduling.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"
#include "advrobust/kernel.hpp"
#include "advrobust/maxmargin.hpp"
#include "advrobust/perceptron.hpp"
#include "advrobust/random.hpp"
#include "advrobust/separated_family.hpp"

namespace advrobust {

// --- synthetic distributions ----------------------------------------------

/// Two parallel slabs, one per label, symmetric about the hyperplane x_1 = 0.
///
/// y = +-1 with probability 1/2; x_1 = y (r + gamma + h U) with U ~ U[0, 1];
/// the remaining d - 1 coordinates are uniform in the l2 ball of radius
/// `spread`. The classifier (e_1, 0) is astute at radius r with robust margin
/// gamma, for every p (the dual norm of e_1 is 1).
struct SlabDistribution {
  std::size_t d = 10;
  double r = 0.5;
  NormSpec norm = NormSpec::from_p(2.0);
  double gamma = 1.0;
  double thickness = 1.0;
  double spread = 1.0;

  Dataset sample(std::size_t n, Rng& rng) const;

  /// Robust margin of the construction.
  double robust_margin() const { return gamma; }

  /// Upper bound on ||x + delta||_2 over the support and ||delta||_p <= r.
  double radius_bound() const;

  /// R^2 / gamma_r^2, the perceptron's update bound.
  double mistake_bound() const;

  /// 2 R / gamma_r, an upper bound on the robust aspect ratio.
  double aspect_ratio_bound() const { return 2.0 * radius_bound() / gamma; }
};

/// Degree-2 polynomial kernel benchmark. Label +1 puts |x_1| in [1.5, 2] and
/// label -1 puts |x_2| in [1.5, 2]; every other coordinate is uniform in
/// [-1/2, 1/2]. Separable in feature space by x_1^2 - x_2^2 for r < 1/2.
struct KernelBenchmark {
  std::size_t d = 3;
  double r = 0.1;

  Dataset sample(std::size_t n, Rng& rng) const;
  KernelSpec kernel() const { return PolynomialKernel{2, 0.0}; }

  /// Lower bound on the feature-space robust margin for the l2 ball.
  double robust_margin_bound() const;
  /// Upper bound on ||phi(z)|| over the inflated support.
  double radius_bound() const;
};

// --- configuration and records ---------------------------------------------

enum class ExperimentKind { upper, lower, kernel };

std::string kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::upper;
  std::vector<std::size_t> d;
  std::vector<std::size_t> n;
  double p = 2.0;
  double r = 0.5;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::size_t test_points = 10'000;
  std::size_t threads = 1;
  bool timing = false;
  std::string out;
  std::string summary;
  // Slab shape, upper-scaling only.
  double gamma = 1.0;
  double thickness = 1.0;
  double spread = 1.0;

  NormSpec norm() const { return NormSpec::from_p(p); }
};

/// Defaults for each experiment kind.
ExperimentConfig default_config(ExperimentKind kind);

/// Throws InvalidConfig on any violated invariant.
void validate_config(const ExperimentConfig& cfg);

struct TrialRecord {
  std::string experiment;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  double train_robust_loss = 0.0;
  double test_robust_loss = 0.0;
  double test_standard_loss = 0.0;
  std::optional<std::size_t> mistakes;
  std::optional<double> posterior_bound;
  std::optional<double> posterior_length_sum;
  std::optional<double> aspect_ratio;
  double wall_time_s = 0.0;

  bool operator==(const TrialRecord&) const = default;
};

/// Runs one trial with an explicit trial seed. Used by the runners and for
/// replaying a record.
std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, std::size_t d,
                                   std::size_t n, std::size_t trial,
                                   std::uint64_t trial_seed);

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t d,
                         std::size_t n, std::size_t trial);

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg);

std::vector<TrialRecord> run_upper_scaling(ExperimentConfig cfg);
std::vector<TrialRecord> run_lower_gap(ExperimentConfig cfg);
std::vector<TrialRecord> run_kernel_scaling(ExperimentConfig cfg);

// --- CSV ---------------------------------------------------------------------

std::string csv_header();
void write_csv(std::ostream& os, const std::vector<TrialRecord>& records);
void emit_csv(const std::vector<TrialRecord>& records, const std::string& path);
std::vector<TrialRecord> parse_csv(std::istream& is);
std::vector<TrialRecord> read_csv(const std::string& path);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_quote(const std::string& field);
std::string format_double(double v);

struct SummaryRow {
  std::string experiment;
  std::size_t d = 0;
  std::size_t n = 0;
  std::string algorithm;
  std::size_t trials = 0;
  double mean_train_robust = 0.0;
  double mean_test_robust = 0.0;
  double stderr_test_robust = 0.0;
  double mean_test_standard = 0.0;
  double stderr_test_standard = 0.0;
  std::optional<double> mean_mistakes;
  std::optional<double> mean_posterior_bound;
  std::optional<double> stderr_posterior_bound;
};

/// Mean and standard error per (experiment, d, n, algorithm), in first-seen
/// order.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      const std::string& path);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// --- datasets ----------------------------------------------------------------

/// One point per line as "y,x1,...,xd"; blank lines and '#' lines skipped.
Dataset parse_dataset_csv(std::istream& is);
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& os, const Dataset& S);
void save_dataset_csv(const Dataset& S, const std::string& path);

// --- config files ------------------------------------------------------------

/// Reads key=value lines ('#' starts a comment) on top of `base`.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base);
ExperimentConfig load_config(const std::string& path, ExperimentConfig base);

std::vector<std::size_t> parse_size_list(const std::string& s);
double parse_p(const std::string& s);

// ---------------------------------------------------------------------------
// Implementation

inline Dataset SlabDistribution::sample(std::size_t n, Rng& rng) const {
  Dataset S;
  S.d = d;
  S.points.reserve(n);
  const std::size_t rest = d - 1;
  Vector g(rest);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = uniform01(rng) < 0.5 ? 1 : -1;
    Vector x(d, 0.0);
    x[0] = y * (r + gamma + thickness * uniform01(rng));
    if (rest > 0) {
      // Uniform in the ball: Gaussian direction, radius U^{1/(d-1)}.
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (auto& v : g) {
          v = standard_normal(rng);
          norm2 += v * v;
        }
      } while (norm2 == 0.0);
      const double rad =
          spread * std::pow(uniform01(rng), 1.0 / static_cast<double>(rest)) /
          std::sqrt(norm2);
      for (std::size_t j = 0; j < rest; ++j) x[j + 1] = g[j] * rad;
    }
    S.points.push_back({std::move(x), y});
  }
  return S;
}

inline double SlabDistribution::radius_bound() const {
  const double outer = r + gamma + thickness;
  // ||delta||_2 <= r d^{max(0, 1/2 - 1/p)} for ||delta||_p <= r.
  const double expo =
      norm.p_is_inf() ? 0.5 : std::max(0.0, 0.5 - 1.0 / norm.p());
  return std::sqrt(outer * outer + spread * spread) +
         r * std::pow(static_cast<double>(d), expo);
}

inline double SlabDistribution::mistake_bound() const {
  const double R = radius_bound();
  return R * R / (gamma * gamma);
}

inline Dataset KernelBenchmark::sample(std::size_t n, Rng& rng) const {
  Dataset S;
  S.d = d;
  S.points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = uniform01(rng) < 0.5 ? 1 : -1;
    Vector x(d);
    for (auto& v : x) v = uniform(rng, -0.5, 0.5);
    const double mag = uniform(rng, 1.5, 2.0);
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    x[y > 0 ? 0 : 1] = sign * mag;
    S.points.push_back({std::move(x), y});
  }
  return S;
}

inline double KernelBenchmark::robust_margin_bound() const {
  // Separator W = e1 e1^T - e2 e2^T, ||W||_F = sqrt 2; inside the r-ball the
  // big coordinate stays above 1.5 - r and the other below 0.5 + r.
  const double big = 1.5 - r, small = 0.5 + r;
  return (big * big - small * small) / std::sqrt(2.0);
}

inline double KernelBenchmark::radius_bound() const {
  // ||phi(z)|| = ||z||^2 for the homogeneous quadratic kernel.
  const double base =
      std::sqrt(4.0 + 0.25 * static_cast<double>(d - 1)) + r;
  return base * base;
}

inline std::string kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::upper: return "upper";
    case ExperimentKind::lower: return "lower";
    case ExperimentKind::kernel: return "kernel";
  }
  return "upper";
}

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "upper" || s == "upper-scaling") return ExperimentKind::upper;
  if (s == "lower" || s == "lower-gap") return ExperimentKind::lower;
  if (s == "kernel" || s == "kernel-scaling") return ExperimentKind::kernel;
  throw InvalidConfig("unknown experiment kind '" + s + "'");
}

inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::upper:
      c.d = {10};
      c.n = {25, 50, 100, 200, 400};
      c.p = 2.0;
      c.r = 0.5;
      c.trials = 200;
      c.test_points = 10'000;
      break;
    case ExperimentKind::lower:
      c.d = {6, 12, 24};
      c.n = {300, 600};
      c.p = 2.0;
      c.r = 1.0;
      c.trials = 200;
      c.test_points = 100'000;
      break;
    case ExperimentKind::kernel:
      c.d = {3};
      c.n = {25, 50, 100};
      c.p = 2.0;
      c.r = 0.1;
      c.trials = 20;
      c.test_points = 200;
      break;
  }
  return c;
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.d.empty()) throw InvalidConfig("d list is empty");
  if (cfg.n.empty()) throw InvalidConfig("n list is empty");
  if (cfg.trials < 1) throw InvalidConfig("trials must be at least 1");
  if (cfg.test_points < 1) throw InvalidConfig("test_points must be at least 1");
  if (!(cfg.r > 0.0) || !std::isfinite(cfg.r)) {
    throw InvalidConfig("r must be a positive finite number");
  }
  try {
    (void)cfg.norm();
  } catch (const InvalidNorm& e) {
    throw InvalidConfig(e.what());
  }
  for (std::size_t v : cfg.d) {
    if (v == 0) throw InvalidConfig("d entries must be positive");
    if (cfg.kind == ExperimentKind::lower && v % 3 != 0) {
      throw InvalidConfig("lower-gap d entries must be multiples of 3, got " +
                          std::to_string(v));
    }
    if (cfg.kind == ExperimentKind::kernel && v < 2) {
      throw InvalidConfig("kernel benchmark needs d >= 2");
    }
  }
  for (std::size_t v : cfg.n) {
    if (v == 0) throw InvalidConfig("n entries must be positive");
  }
  if (cfg.kind == ExperimentKind::kernel) {
    if (cfg.r >= 0.5) throw InvalidConfig("kernel benchmark needs r < 0.5");
    if (!cfg.norm().p_is_inf() && cfg.p != 2.0) {
      throw InvalidConfig("kernel benchmark supports p in {2, inf}");
    }
  }
  if (cfg.kind == ExperimentKind::upper) {
    if (!(cfg.gamma > 0.0) || !(cfg.thickness >= 0.0) || !(cfg.spread >= 0.0)) {
      throw InvalidConfig("slab shape needs gamma > 0, thickness >= 0, spread >= 0");
    }
  }
}

inline std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t d,
                                std::size_t n, std::size_t trial) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.kind) + 1, d, n,
                                trial});
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0, bool timing) {
  if (!timing) return 0.0;
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline Dataset prefix(const Dataset& S, std::size_t k) {
  Dataset out;
  out.d = S.d;
  out.points.assign(S.points.begin(),
                    S.points.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

inline TrialRecord base_record(const ExperimentConfig& cfg, std::size_t d,
                               std::size_t n, std::size_t trial,
                               std::uint64_t seed, const char* algorithm) {
  TrialRecord rec;
  rec.experiment = kind_name(cfg.kind);
  rec.d = d;
  rec.n = n;
  rec.trial = trial;
  rec.seed = seed;
  rec.algorithm = algorithm;
  return rec;
}

inline std::vector<TrialRecord> upper_trial(const ExperimentConfig& cfg,
                                            std::size_t d, std::size_t n,
                                            std::size_t trial,
                                            std::uint64_t seed) {
  const NormSpec norm = cfg.norm();
  SlabDistribution dist{d, cfg.r, norm, cfg.gamma, cfg.thickness, cfg.spread};
  Rng rng(seed);
  const Dataset train = dist.sample(n, rng);
  const Dataset test = dist.sample(cfg.test_points, rng);
  std::vector<TrialRecord> out;

  auto record = [&](const char* name, const LinearClassifier& f,
                    std::optional<std::size_t> mistakes, double secs) {
    TrialRecord rec = base_record(cfg, d, n, trial, seed, name);
    rec.train_robust_loss = empirical_robust_loss(f, train, cfg.r, norm);
    rec.test_robust_loss = empirical_robust_loss(f, test, cfg.r, norm);
    rec.test_standard_loss = empirical_standard_loss(f, test);
    rec.mistakes = mistakes;
    rec.wall_time_s = secs;
    out.push_back(std::move(rec));
  };

  auto t0 = Clock::now();
  const auto mod = modified_adversarial_perceptron(train, cfg.r, norm, rng);
  record("modified_adversarial_perceptron", mod.classifier, mod.mistakes,
         seconds_since(t0, cfg.timing));

  t0 = Clock::now();
  const auto gen = general_adversarial_perceptron(train, cfg.r, norm, rng);
  record("general_adversarial_perceptron", gen.classifier, gen.mistakes,
         seconds_since(t0, cfg.timing));

  t0 = Clock::now();
  const auto svm = hard_margin_svm(train);
  record("hard_margin_svm", svm.classifier, std::nullopt,
         seconds_since(t0, cfg.timing));
  return out;
}

inline std::vector<TrialRecord> lower_trial(const ExperimentConfig& cfg,
                                            const FamilyParams& params,
                                            std::size_t n, std::size_t trial,
                                            std::uint64_t seed) {
  const std::size_t d = params.d;
  const NormSpec norm = params.norm;
  Rng rng(seed);
  const DaDistribution dist = sample_pi(rng, params);
  const FamilySample train = sample_da(dist, n, rng);
  const PosteriorIntervals post = posterior_intervals(train.coords, params);
  const double aspect = aspect_ratio_da(dist);
  std::vector<TrialRecord> out;

  auto record = [&](const char* name, const LinearClassifier& f,
                    std::optional<std::size_t> mistakes, double secs) {
    TrialRecord rec = base_record(cfg, d, n, trial, seed, name);
    rec.train_robust_loss = empirical_robust_loss(f, train.data, cfg.r, norm);
    const MonteCarloLoss mc = monte_carlo_loss(f, dist, cfg.test_points, rng);
    rec.test_robust_loss = mc.robust;
    rec.test_standard_loss = mc.standard;
    rec.mistakes = mistakes;
    rec.posterior_bound = post.bound_value;
    rec.posterior_length_sum = post.total_length;
    rec.aspect_ratio = aspect;
    rec.wall_time_s = secs;
    out.push_back(std::move(rec));
  };

  auto t0 = Clock::now();
  const auto gen = general_adversarial_perceptron(train.data, cfg.r, norm, rng);
  const double gen_secs = seconds_since(t0, cfg.timing);
  record("general_adversarial_perceptron", gen.classifier, gen.mistakes, gen_secs);

  t0 = Clock::now();
  const auto svm = hard_margin_svm(train.data);
  record("hard_margin_svm", svm.classifier, std::nullopt,
         seconds_since(t0, cfg.timing));
  return out;
}

inline std::vector<TrialRecord> kernel_trial(const ExperimentConfig& cfg,
                                             std::size_t d, std::size_t n,
                                             std::size_t trial,
                                             std::uint64_t seed) {
  const NormSpec norm = cfg.norm();
  KernelBenchmark bench{d, cfg.r};
  Rng rng(seed);
  const Dataset train = bench.sample(n, rng);
  const Dataset test = bench.sample(cfg.test_points, rng);
  AttackOptions opts;
  opts.seed = rng();

  auto t0 = Clock::now();
  const auto k = static_cast<std::size_t>(uniform_int(rng, 0, n));
  KernelClassifier f;
  f.kernel = bench.kernel();
  if (k > 0) {
    f = adversarial_kernel_perceptron(prefix(train, k), bench.kernel(), cfg.r,
                                      norm, opts);
  }
  const double secs = seconds_since(t0, cfg.timing);

  TrialRecord rec =
      base_record(cfg, d, n, trial, seed, "modified_adversarial_kernel_perceptron");
  rec.train_robust_loss = kernel_empirical_robust_loss(f, train, cfg.r, norm, opts);
  rec.test_robust_loss = kernel_empirical_robust_loss(f, test, cfg.r, norm, opts);
  rec.test_standard_loss = kernel_empirical_standard_loss(f, test);
  rec.mistakes = f.size();
  rec.wall_time_s = secs;
  return {rec};
}

inline std::map<std::size_t, FamilyParams> family_params_by_d(
    const ExperimentConfig& cfg) {
  std::map<std::size_t, FamilyParams> out;
  for (std::size_t d : cfg.d) {
    if (!out.count(d)) out.emplace(d, make_family_params(d, cfg.r, cfg.norm()));
  }
  return out;
}

}  // namespace detail

inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg,
                                          std::size_t d, std::size_t n,
                                          std::size_t trial,
                                          std::uint64_t seed) {
  switch (cfg.kind) {
    case ExperimentKind::upper:
      return detail::upper_trial(cfg, d, n, trial, seed);
    case ExperimentKind::lower:
      return detail::lower_trial(cfg, make_family_params(d, cfg.r, cfg.norm()),
                                 n, trial, seed);
    case ExperimentKind::kernel:
      return detail::kernel_trial(cfg, d, n, trial, seed);
  }
  return {};
}

inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  struct Task {
    std::size_t d, n, trial;
  };
  std::vector<Task> tasks;
  for (std::size_t d : cfg.d) {
    for (std::size_t n : cfg.n) {
      for (std::size_t t = 0; t < cfg.trials; ++t) tasks.push_back({d, n, t});
    }
  }
  std::map<std::size_t, FamilyParams> family;
  if (cfg.kind == ExperimentKind::lower) family = detail::family_params_by_d(cfg);

  std::vector<std::vector<TrialRecord>> slots(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& tk = tasks[i];
      const std::uint64_t seed = trial_seed(cfg, tk.d, tk.n, tk.trial);
      try {
        if (cfg.kind == ExperimentKind::lower) {
          slots[i] = detail::lower_trial(cfg, family.at(tk.d), tk.n, tk.trial, seed);
        } else {
          slots[i] = run_trial(cfg, tk.d, tk.n, tk.trial, seed);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads =
      std::max<std::size_t>(1, std::min(cfg.threads, tasks.size()));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<TrialRecord> out;
  for (auto& s : slots) {
    for (auto& r : s) out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TrialRecord> run_upper_scaling(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::upper;
  return run_experiment(cfg);
}

inline std::vector<TrialRecord> run_lower_gap(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::lower;
  return run_experiment(cfg);
}

inline std::vector<TrialRecord> run_kernel_scaling(ExperimentConfig cfg) {
  cfg.kind = ExperimentKind::kernel;
  return run_experiment(cfg);
}

// --- CSV ---------------------------------------------------------------------

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw InvalidArgument("unterminated quoted CSV field");
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_header() {
  return "experiment,d,n,trial,seed,algorithm,train_robust_loss,test_robust_loss,"
         "test_standard_loss,mistakes,posterior_bound,posterior_length_sum,"
         "aspect_ratio,wall_time_s";
}

inline void write_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << csv_header() << '\n';
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& r : records) {
    os << csv_quote(r.experiment) << ',' << r.d << ',' << r.n << ',' << r.trial
       << ',' << r.seed << ',' << csv_quote(r.algorithm) << ','
       << format_double(r.train_robust_loss) << ','
       << format_double(r.test_robust_loss) << ','
       << format_double(r.test_standard_loss) << ','
       << (r.mistakes ? std::to_string(*r.mistakes) : std::string()) << ','
       << opt(r.posterior_bound) << ',' << opt(r.posterior_length_sum) << ','
       << opt(r.aspect_ratio) << ',' << format_double(r.wall_time_s) << '\n';
  }
}

inline void emit_csv(const std::vector<TrialRecord>& records,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_csv(os, records);
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

namespace detail {

inline std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidArgument("not an unsigned integer: '" + s + "'");
  }
  return std::stoull(s);
}

inline double parse_real(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  return parse_double(s);
}

}  // namespace detail

inline std::vector<TrialRecord> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw InvalidArgument("unexpected CSV header");
  std::vector<TrialRecord> out;
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return detail::parse_real(s);
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 14) {
      throw InvalidArgument("CSV row has " + std::to_string(f.size()) +
                            " fields, expected 14");
    }
    TrialRecord r;
    r.experiment = f[0];
    r.d = detail::parse_u64(f[1]);
    r.n = detail::parse_u64(f[2]);
    r.trial = detail::parse_u64(f[3]);
    r.seed = detail::parse_u64(f[4]);
    r.algorithm = f[5];
    r.train_robust_loss = detail::parse_real(f[6]);
    r.test_robust_loss = detail::parse_real(f[7]);
    r.test_standard_loss = detail::parse_real(f[8]);
    if (!f[9].empty()) r.mistakes = detail::parse_u64(f[9]);
    r.posterior_bound = opt(f[10]);
    r.posterior_length_sum = opt(f[11]);
    r.aspect_ratio = opt(f[12]);
    r.wall_time_s = detail::parse_real(f[13]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TrialRecord> read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(is);
}

inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  struct Acc {
    SummaryRow row;
    std::vector<double> robust, standard, train, mistakes, bound;
  };
  std::vector<Acc> accs;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const std::string key = r.experiment + '\x1f' + std::to_string(r.d) + '\x1f' +
                            std::to_string(r.n) + '\x1f' + r.algorithm;
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, accs.size()).first;
      Acc a;
      a.row.experiment = r.experiment;
      a.row.d = r.d;
      a.row.n = r.n;
      a.row.algorithm = r.algorithm;
      accs.push_back(std::move(a));
    }
    Acc& a = accs[it->second];
    a.robust.push_back(r.test_robust_loss);
    a.standard.push_back(r.test_standard_loss);
    a.train.push_back(r.train_robust_loss);
    if (r.mistakes) a.mistakes.push_back(static_cast<double>(*r.mistakes));
    if (r.posterior_bound) a.bound.push_back(*r.posterior_bound);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto stderr_of = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
  };
  std::vector<SummaryRow> out;
  for (auto& a : accs) {
    a.row.trials = a.robust.size();
    a.row.mean_train_robust = mean(a.train);
    a.row.mean_test_robust = mean(a.robust);
    a.row.stderr_test_robust = stderr_of(a.robust);
    a.row.mean_test_standard = mean(a.standard);
    a.row.stderr_test_standard = stderr_of(a.standard);
    if (!a.mistakes.empty()) a.row.mean_mistakes = mean(a.mistakes);
    if (!a.bound.empty()) {
      a.row.mean_posterior_bound = mean(a.bound);
      a.row.stderr_posterior_bound = stderr_of(a.bound);
    }
    out.push_back(a.row);
  }
  return out;
}

inline void write_summary_csv(std::ostream& os,
                              const std::vector<SummaryRow>& rows) {
  os << "experiment,d,n,algorithm,trials,mean_train_robust_loss,"
        "mean_test_robust_loss,stderr_test_robust_loss,mean_test_standard_loss,"
        "stderr_test_standard_loss,mean_mistakes,mean_posterior_bound,"
        "stderr_posterior_bound\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& r : rows) {
    os << csv_quote(r.experiment) << ',' << r.d << ',' << r.n << ','
       << csv_quote(r.algorithm) << ',' << r.trials << ','
       << format_double(r.mean_train_robust) << ','
       << format_double(r.mean_test_robust) << ','
       << format_double(r.stderr_test_robust) << ','
       << format_double(r.mean_test_standard) << ','
       << format_double(r.stderr_test_standard) << ',' << opt(r.mean_mistakes)
       << ',' << opt(r.mean_posterior_bound) << ','
       << opt(r.stderr_posterior_bound) << '\n';
  }
}

inline void emit_summary_csv(const std::vector<SummaryRow>& rows,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_summary_csv(os, rows);
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("slope fit needs two or more paired points");
  }
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw InvalidArgument("log-log fit needs positive values");
    }
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw InvalidArgument("slope fit needs distinct x values");
  return (m * sxy - sx * sy) / den;
}

// --- datasets ----------------------------------------------------------------

inline Dataset parse_dataset_csv(std::istream& is) {
  Dataset S;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (f.size() < 2) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) +
                            ": need a label and at least one coordinate");
    }
    const double y = detail::parse_real(f[0]);
    if (y != 1.0 && y != -1.0) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) +
                            ": label must be 1 or -1");
    }
    Vector x(f.size() - 1);
    for (std::size_t j = 1; j < f.size(); ++j) x[j - 1] = detail::parse_real(f[j]);
    S.add(std::move(x), static_cast<int>(y));
  }
  return S;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return parse_dataset_csv(is);
}

inline void write_dataset_csv(std::ostream& os, const Dataset& S) {
  for (const auto& pt : S.points) {
    os << pt.y;
    for (double v : pt.x) os << ',' << format_double(v);
    os << '\n';
  }
}

inline void save_dataset_csv(const Dataset& S, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(os, S);
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

// --- config files ------------------------------------------------------------

inline std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) throw InvalidConfig("empty entry in list '" + s + "'");
    item = item.substr(a, b - a + 1);
    if (item.find_first_not_of("0123456789") != std::string::npos) {
      throw InvalidConfig("not a positive integer: '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  if (out.empty()) throw InvalidConfig("empty list");
  return out;
}

inline double parse_p(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF" || s == "infinity") return kInf;
  try {
    return detail::parse_double(s);
  } catch (const InvalidArgument& e) {
    throw InvalidConfig(e.what());
  }
}

namespace detail {

inline double config_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const InvalidArgument&) {
    throw InvalidConfig("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t config_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidConfig("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return std::stoull(v);
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key == "experiment") cfg.kind = parse_kind(val);
    else if (key == "d") cfg.d = parse_size_list(val);
    else if (key == "n") cfg.n = parse_size_list(val);
    else if (key == "p") cfg.p = parse_p(val);
    else if (key == "r") cfg.r = detail::config_real(key, val);
    else if (key == "trials") cfg.trials = detail::config_uint(key, val);
    else if (key == "seed") cfg.seed = detail::config_uint(key, val);
    else if (key == "test_points") cfg.test_points = detail::config_uint(key, val);
    else if (key == "threads") cfg.threads = detail::config_uint(key, val);
    else if (key == "timing") cfg.timing = val == "1" || val == "true";
    else if (key == "out") cfg.out = val;
    else if (key == "summary") cfg.summary = val;
    else if (key == "gamma") cfg.gamma = detail::config_real(key, val);
    else if (key == "thickness") cfg.thickness = detail::config_real(key, val);
    else if (key == "spread") cfg.spread = detail::config_real(key, val);
    else throw InvalidConfig("unknown config key '" + key + "'");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path,
                                    ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  return parse_config(is, std::move(base));
}

}  // namespace advrobust
