// Command-line front end for the advrobust library.
//
// Exit codes: 0 success, 1 invalid arguments or configuration, 2 runtime or
// I/O failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advrobust/advrobust.hpp"

namespace ar = advrobust;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

std::string join(const ar::Vector& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += ar::format_double(v[i]);
  }
  return s;
}

ar::Vector parse_vector_arg(const std::string& s, const char* what) {
  try {
    ar::Vector v = ar::detail::parse_vector(s);
    if (v.empty()) throw ar::InvalidArgument("empty");
    return v;
  } catch (const ar::InvalidArgument&) {
    throw ar::InvalidConfig(std::string("--") + what +
                            " expects a comma-separated list of numbers");
  }
}

void print_classifier(const ar::LinearClassifier& f) {
  std::cout << "w=" << join(f.w) << '\n' << "b=" << ar::format_double(f.b) << '\n';
}

struct CommonArgs {
  std::string p = "2";
  double r = 0.0;
  std::uint64_t seed = 1;
};

// --- attack ------------------------------------------------------------------

struct AttackArgs {
  CommonArgs c;
  std::string w, x;
  double b = 0.0;
  int y = 1;
};

void run_attack(const AttackArgs& a) {
  const ar::NormSpec norm = ar::NormSpec::from_p(ar::parse_p(a.c.p));
  const ar::LinearClassifier f{parse_vector_arg(a.w, "w"), a.b};
  const ar::LabeledPoint pt{parse_vector_arg(a.x, "x"), a.y};
  if (a.y != 1 && a.y != -1) throw ar::InvalidConfig("--y must be 1 or -1");
  if (pt.x.size() != f.w.size()) throw ar::InvalidConfig("--w and --x differ in length");
  const ar::Vector delta = ar::worst_case_perturbation(f.w, a.y, a.c.r, norm);
  ar::Vector z = pt.x;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += delta[i];
  const double margin = ar::robust_margin_value(f, pt, a.c.r, norm);
  std::cout << "delta=" << join(delta) << '\n'
            << "attacked=" << join(z) << '\n'
            << "robust_margin=" << ar::format_double(margin) << '\n'
            << "astute=" << (margin > 0.0 ? "true" : "false") << '\n';
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  CommonArgs c;
  std::string data;
  std::string algorithm = "general";
  std::size_t max_epochs = 1000;
};

void run_train(const TrainArgs& a) {
  const ar::NormSpec norm = ar::NormSpec::from_p(ar::parse_p(a.c.p));
  const ar::Dataset S = ar::read_dataset_csv(a.data);
  ar::Rng rng(a.c.seed);
  ar::TrainReport rep;
  if (a.algorithm == "perceptron") {
    rep = ar::adversarial_perceptron(S, a.c.r, norm);
  } else if (a.algorithm == "modified") {
    rep = ar::modified_adversarial_perceptron(S, a.c.r, norm, rng);
  } else if (a.algorithm == "general") {
    rep = ar::general_adversarial_perceptron(S, a.c.r, norm, rng);
  } else if (a.algorithm == "stable") {
    rep = ar::adversarial_perceptron_until_stable(S, a.c.r, norm, a.max_epochs);
  } else if (a.algorithm == "general-stable") {
    rep = ar::general_adversarial_perceptron_until_stable(S, a.c.r, norm, rng,
                                                          a.max_epochs);
  } else {
    throw ar::InvalidConfig("unknown algorithm '" + a.algorithm + "'");
  }
  print_classifier(rep.classifier);
  std::cout << "mistakes=" << rep.mistakes << '\n'
            << "cutoff_k=" << rep.cutoff_k << '\n'
            << "epochs=" << rep.epochs << '\n'
            << "train_robust_loss="
            << ar::format_double(ar::empirical_robust_loss(rep.classifier, S, a.c.r, norm))
            << '\n';
}

// --- svm ---------------------------------------------------------------------

struct SvmArgs {
  std::string data;
  double tolerance = 1e-6;
};

void run_svm(const SvmArgs& a) {
  const ar::Dataset S = ar::read_dataset_csv(a.data);
  const ar::SvmSolution sol = ar::hard_margin_svm(S, a.tolerance);
  print_classifier(sol.classifier);
  std::cout << "margin=" << ar::format_double(sol.achieved_margin) << '\n'
            << "margin_upper_bound=" << ar::format_double(sol.margin_upper_bound) << '\n'
            << "iterations=" << sol.iterations << '\n'
            << "converged=" << (sol.converged ? "true" : "false") << '\n';
}

// --- gen-family --------------------------------------------------------------

struct FamilyArgs {
  CommonArgs c;
  std::size_t d = 6;
  std::size_t n = 0;
  std::string out;
  std::string samples_out;
};

void run_gen_family(const FamilyArgs& a) {
  const ar::NormSpec norm = ar::NormSpec::from_p(ar::parse_p(a.c.p));
  if (a.d == 0 || a.d % 3 != 0) throw ar::InvalidConfig("--d must be a positive multiple of 3");
  if (!(a.c.r > 0.0)) throw ar::InvalidConfig("--r must be positive");
  const ar::FamilyParams params = ar::make_family_params(a.d, a.c.r, norm);
  ar::Rng rng(a.c.seed);
  ar::FamilyRecord rec{ar::sample_pi(rng, params), a.c.seed};
  if (a.out.empty()) {
    ar::write_family_record(std::cout, rec);
  } else {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw ar::IoError("cannot open '" + a.out + "' for writing");
    ar::write_family_record(os, rec);
    if (!os) throw ar::IoError("write to '" + a.out + "' failed");
  }
  if (a.n > 0) {
    const ar::FamilySample sample = ar::sample_da(rec.dist, a.n, rng);
    if (a.samples_out.empty()) {
      ar::write_dataset_csv(std::cout, sample.data);
    } else {
      ar::save_dataset_csv(sample.data, a.samples_out);
    }
  }
}

// --- posterior ---------------------------------------------------------------

struct PosteriorArgs {
  std::string record;
  std::string data;
};

void run_posterior(const PosteriorArgs& a) {
  std::ifstream is(a.record);
  if (!is) throw ar::IoError("cannot open '" + a.record + "' for reading");
  const ar::FamilyRecord rec = ar::read_family_record(is);
  const ar::Dataset S = ar::read_dataset_csv(a.data);
  const ar::PosteriorIntervals post = ar::posterior_intervals(S, rec.dist.params);
  for (std::size_t k = 0; k < post.intervals.size(); ++k) {
    const auto& iv = post.intervals[k];
    std::cout << "interval_" << k << '=' << (iv.lo_closed ? '[' : '(')
              << ar::format_double(iv.lo) << ',' << ar::format_double(iv.hi)
              << (iv.hi_closed ? ']' : ')') << '\n';
  }
  std::cout << "length_sum=" << ar::format_double(post.total_length) << '\n'
            << "bound_value=" << ar::format_double(post.bound_value) << '\n';
  if (rec.dist.t) {
    bool inside = true;
    for (std::size_t k = 0; k < post.intervals.size(); ++k) {
      inside = inside && post.intervals[k].contains((*rec.dist.t)[k]);
    }
    std::cout << "true_t_inside=" << (inside ? "true" : "false") << '\n';
  }
}

// --- experiment --------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::optional<std::string> d, n, p;
  std::optional<double> r;
  std::optional<std::size_t> trials, test_points, threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, summary;
  bool timing = false;
};

int run_experiment_cmd(ar::ExperimentKind kind, const ExperimentArgs& a) {
  ar::ExperimentConfig cfg = ar::default_config(kind);
  if (!a.config.empty()) {
    cfg = ar::load_config(a.config, cfg);
    if (cfg.kind != kind) {
      throw ar::InvalidConfig("config file names experiment '" +
                              ar::kind_name(cfg.kind) + "' but the subcommand is '" +
                              ar::kind_name(kind) + "'");
    }
  }
  if (a.d) cfg.d = ar::parse_size_list(*a.d);
  if (a.n) cfg.n = ar::parse_size_list(*a.n);
  if (a.p) cfg.p = ar::parse_p(*a.p);
  if (a.r) cfg.r = *a.r;
  if (a.trials) cfg.trials = *a.trials;
  if (a.test_points) cfg.test_points = *a.test_points;
  if (a.threads) cfg.threads = *a.threads;
  if (a.seed) cfg.seed = *a.seed;
  if (a.out) cfg.out = *a.out;
  if (a.summary) cfg.summary = *a.summary;
  if (a.timing) cfg.timing = true;
  ar::validate_config(cfg);

  const auto records = ar::run_experiment(cfg);
  if (cfg.out.empty()) {
    ar::write_csv(std::cout, records);
  } else {
    ar::emit_csv(records, cfg.out);
  }
  if (!cfg.summary.empty()) ar::emit_summary_csv(ar::summarize(records), cfg.summary);
  return 0;
}

void add_common(CLI::App* app, CommonArgs& c, bool with_seed) {
  app->add_option("--p", c.p, "lp exponent of the perturbation ball (> 1, or inf)");
  app->add_option("--r", c.r, "perturbation radius")->check(CLI::NonNegativeNumber);
  if (with_seed) app->add_option("--seed", c.seed, "RNG seed");
}

void add_experiment(CLI::App* parent, const char* name, const char* help,
                    ExperimentArgs& a) {
  CLI::App* sub = parent->add_subcommand(name, help);
  sub->add_option("--config", a.config, "key=value config file (flags override it)");
  sub->add_option("--d", a.d, "comma-separated dimensions");
  sub->add_option("--n", a.n, "comma-separated training-set sizes");
  sub->add_option("--p", a.p, "lp exponent (> 1, or inf)");
  sub->add_option("--r", a.r, "perturbation radius");
  sub->add_option("--trials", a.trials, "trials per (d, n) cell");
  sub->add_option("--test-points", a.test_points, "test draws per trial");
  sub->add_option("--threads", a.threads, "worker threads");
  sub->add_option("--seed", a.seed, "master seed");
  sub->add_option("--out", a.out, "trial CSV path (stdout when absent)");
  sub->add_option("--summary", a.summary, "per-cell summary CSV path");
  sub->add_flag("--timing", a.timing, "record wall-clock seconds per fit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially robust linear and kernel classification toolkit"};
  app.require_subcommand(1);

  AttackArgs attack;
  CLI::App* attack_cmd = app.add_subcommand("attack", "worst-case lp perturbation against (w, b)");
  add_common(attack_cmd, attack.c, false);
  attack_cmd->add_option("--w", attack.w, "weight vector, comma-separated")->required();
  attack_cmd->add_option("--b", attack.b, "offset");
  attack_cmd->add_option("--x", attack.x, "point, comma-separated")->required();
  attack_cmd->add_option("--y", attack.y, "label (1 or -1)");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "adversarial perceptron on a dataset CSV");
  add_common(train_cmd, train.c, true);
  train_cmd->add_option("--data", train.data, "dataset CSV (y,x1,...,xd)")->required();
  train_cmd->add_option("--algorithm", train.algorithm,
                        "perceptron | modified | general | stable | general-stable");
  train_cmd->add_option("--max-epochs", train.max_epochs, "pass cap for the stable variants");

  SvmArgs svm;
  CLI::App* svm_cmd = app.add_subcommand("svm", "hard-margin SVM on a dataset CSV");
  svm_cmd->add_option("--data", svm.data, "dataset CSV (y,x1,...,xd)")->required();
  svm_cmd->add_option("--tolerance", svm.tolerance, "relative margin tolerance");

  FamilyArgs fam;
  fam.c.r = 1.0;
  CLI::App* fam_cmd = app.add_subcommand("gen-family", "draw a lower-bound distribution and optionally a sample");
  add_common(fam_cmd, fam.c, true);
  fam_cmd->add_option("--d", fam.d, "dimension (multiple of 3)");
  fam_cmd->add_option("--n", fam.n, "number of points to sample");
  fam_cmd->add_option("--out", fam.out, "distribution record path (stdout when absent)");
  fam_cmd->add_option("--samples-out", fam.samples_out, "sample CSV path");

  PosteriorArgs post;
  CLI::App* post_cmd = app.add_subcommand("posterior", "posterior intervals for a sample");
  post_cmd->add_option("--record", post.record, "distribution record")->required();
  post_cmd->add_option("--data", post.data, "sample CSV")->required();

  CLI::App* exp_cmd = app.add_subcommand("experiment", "seeded scaling experiments");
  exp_cmd->require_subcommand(1);
  ExperimentArgs up, low, ker;
  add_experiment(exp_cmd, "upper", "robust loss vs n on slab data", up);
  add_experiment(exp_cmd, "lower", "lower-bound family gap", low);
  add_experiment(exp_cmd, "kernel", "quadratic-kernel perceptron", ker);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (attack_cmd->parsed()) run_attack(attack);
    else if (train_cmd->parsed()) run_train(train);
    else if (svm_cmd->parsed()) run_svm(svm);
    else if (fam_cmd->parsed()) run_gen_family(fam);
    else if (post_cmd->parsed()) run_posterior(post);
    else if (exp_cmd->got_subcommand("upper")) return run_experiment_cmd(ar::ExperimentKind::upper, up);
    else if (exp_cmd->got_subcommand("lower")) return run_experiment_cmd(ar::ExperimentKind::lower, low);
    else if (exp_cmd->got_subcommand("kernel")) return run_experiment_cmd(ar::ExperimentKind::kernel, ker);
  } catch (const ar::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ar::InvalidNorm& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
