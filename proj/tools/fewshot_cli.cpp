// fewshot: validate, synthesize and evaluate FSE1 embedding files.
//
// Exit codes: 0 ok, 1 validate found the file invalid, 2 data error,
// 3 configuration error (including bad flags), 4 numeric error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fewshot/bench.hpp"
#include "fewshot/error.hpp"
#include "fewshot/fixtures.hpp"

using namespace fewshot;

namespace {

constexpr int kInvalid = 1;

struct EvalFlags {
  std::string data;
  std::string method = "proto";
  std::uint32_t n = 5;
  std::uint32_t k = 1;
  std::uint32_t q = 15;
  std::size_t episodes = 2000;
  std::uint64_t seed = 0;
  double eps = 0.1;
  std::size_t sinkhorn_iters = 1000;
  double sinkhorn_tol = 1e-8;
  std::size_t passes = 1;
  std::string cost_metric = "sq-euclidean-normalized";
  std::string fusion = "concat";
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out = "-";
  bool timing = false;
};

void add_eval_flags(CLI::App& cmd, EvalFlags& f) {
  cmd.add_option("--data", f.data, "FSE1 (.fse) or CSV (.csv) embedding file")->required();
  cmd.add_option("--method", f.method, "proto | opta");
  cmd.add_option("--n", f.n, "classes per episode (N-way)");
  cmd.add_option("--q", f.q, "queries per class");
  cmd.add_option("--episodes", f.episodes, "number of episodes");
  cmd.add_option("--seed", f.seed, "base seed; episode i uses a seed derived from (seed, i)");
  cmd.add_option("--eps", f.eps, "Sinkhorn entropic regularization");
  cmd.add_option("--sinkhorn-iters", f.sinkhorn_iters, "Sinkhorn iteration budget at the target eps");
  cmd.add_option("--sinkhorn-tol", f.sinkhorn_tol, "Sinkhorn tolerance on the max marginal violation");
  cmd.add_option("--passes", f.passes, "OpTA transport passes");
  cmd.add_option("--cost-metric", f.cost_metric, "sq-euclidean-normalized | euclidean | one-minus-cosine");
  cmd.add_option("--fusion", f.fusion, "token fusion for kind=tokens files: concat | sum | cls-only");
  cmd.add_option("--threads", f.threads, "worker threads, default = hardware threads (results do not depend on this)");
  cmd.add_flag("--timing", f.timing, "include wall_time_s in the report");
}

EvalConfig eval_config(const EvalFlags& f) {
  EvalConfig cfg;
  cfg.sinkhorn.epsilon = f.eps;
  cfg.sinkhorn.max_iters = f.sinkhorn_iters;
  cfg.sinkhorn.tol = f.sinkhorn_tol;
  cfg.sinkhorn.passes = f.passes;
  cfg.sinkhorn.validate();
  cfg.metric = parse_cost_metric(f.cost_metric);
  cfg.fusion = parse_fusion_mode(f.fusion);
  if (f.threads == 0) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
  cfg.threads = f.threads;
  if (f.episodes == 0) throw Error(ErrorCode::InvalidConfig, "episodes must be >= 1");
  cfg.progress = [total = f.episodes](std::size_t done) {
    std::fprintf(stderr, "[fewshot] %zu/%zu episodes\n", done, total);
  };
  return cfg;
}

bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

LoadedSet load_any(const std::string& path) {
  if (has_suffix(path, ".csv")) return load_csv(path);
  return load(path);
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
}

void print_class_counts(std::span<const std::uint32_t> labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (auto l : labels) ++counts[l];
  for (std::size_t c = 0; c < classes; ++c) std::cout << "class " << c << ": " << counts[c] << '\n';
}

int cmd_validate(const std::string& path) {
  try {
    const LoadedSet loaded = load_any(path);
    if (const auto* set = std::get_if<EmbeddingSet>(&loaded)) {
      std::cout << "fused n=" << set->size() << " d=" << set->dim() << " c=" << set->num_classes() << '\n';
      print_class_counts(set->labels(), set->num_classes());
    } else {
      const auto& tokens = std::get<TokenEmbeddingSet>(loaded);
      std::cout << "tokens n=" << tokens.size() << " d=" << tokens.dim() << " c=" << tokens.num_classes()
                << " p=" << tokens.num_patches() << '\n';
      print_class_counts(tokens.labels(), tokens.num_classes());
      const auto& a = tokens.attention();
      std::size_t zero_rows = 0;
      for (Eigen::Index i = 0; i < a.rows(); ++i) zero_rows += a.row(i).sum() == 0.0f ? 1 : 0;
      std::printf("attention min=%.6g max=%.6g mean=%.6g zero_rows=%zu\n", static_cast<double>(a.minCoeff()),
                  static_cast<double>(a.maxCoeff()), static_cast<double>(a.mean()), zero_rows);
      // Surfaces negative or all-zero attention rows as typed errors.
      fuse_set(tokens, FusionMode::Concat);
    }
    std::cout << "nan scan: clean\n";
    return 0;
  } catch (const Error& e) {
    std::cout << "invalid: " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_eval(const EvalFlags& f) {
  const Method method = parse_method(f.method);
  const EpisodeSpec spec{f.n, f.k, f.q};
  spec.validate();
  const EvalConfig cfg = eval_config(f);
  const EmbeddingSet set = as_fused(load_any(f.data), cfg.fusion);
  const EvalReport report = run_eval(set, spec, method, cfg, f.episodes, f.seed);
  write_text(f.out, report_to_json(report, f.timing) + "\n");
  std::printf("%s %u-way %u-shot: %.4f ± %.4f\n", std::string(to_string(method)).c_str(), spec.n_way, spec.k_shot,
              report.mean_acc, report.ci95);
  if (report.sinkhorn_nonconverged > 0) {
    std::fprintf(stderr, "[fewshot] warning: %zu Sinkhorn solves hit the iteration budget\n",
                 report.sinkhorn_nonconverged);
  }
  return 0;
}

int cmd_sweep(const EvalFlags& f, const std::vector<std::uint32_t>& k_list, const std::vector<std::uint32_t>& q_list) {
  const Method method = parse_method(f.method);
  for (auto k : k_list) EpisodeSpec{f.n, k, 1}.validate();
  for (auto q : q_list) EpisodeSpec{f.n, 1, q}.validate();
  EvalConfig cfg = eval_config(f);
  cfg.keep_per_episode = false;
  const EmbeddingSet set = as_fused(load_any(f.data), cfg.fusion);
  const auto reports = sweep(set, f.n, k_list, q_list, method, cfg, f.episodes, f.seed);
  write_text(f.out, sweep_to_csv(reports));
  return 0;
}

int cmd_synth(const SynthSpec& spec, std::uint32_t patches, const std::string& out) {
  if (patches > 0) {
    save(generate_synthetic_tokens(spec, patches), out);
  } else {
    save(generate_synthetic(spec), out);
  }
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_losses(const std::string& path, const FixtureOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  std::cout << format_fixture_results(evaluate_fixtures(doc, opts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot evaluation over precomputed embeddings"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file setting any long flag; command-line flags take precedence");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check an embedding file and print diagnostics");
  validate->add_option("path", validate_path, "FSE1 or CSV file")->required();

  SynthSpec synth_spec;
  std::uint32_t patches = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic Gaussian-cluster FSE1 file");
  synth->add_option("--classes", synth_spec.classes, "number of classes");
  synth->add_option("--per-class", synth_spec.per_class, "samples per class");
  synth->add_option("--dim", synth_spec.dim, "embedding dimension");
  synth->add_option("--radius", synth_spec.mean_radius, "norm of every class mean");
  synth->add_option("--sigma", synth_spec.noise_sigma, "isotropic noise std");
  synth->add_option("--seed", synth_spec.seed, "generator seed");
  synth->add_option("--patches", patches, "write a kind=tokens file with this many patches (0 = fused)");
  synth->add_option("--out", synth_out, "output path")->required();

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "evaluate a classifier over random episodes; writes report JSON");
  add_eval_flags(*eval, eval_flags);
  eval->add_option("--k", eval_flags.k, "support samples per class (K-shot)");
  eval->add_option("--out", eval_flags.out, "report path ('-' = stdout)");

  EvalFlags sweep_flags;
  std::vector<std::uint32_t> k_list{1, 2, 3, 4, 5};
  std::vector<std::uint32_t> q_list{15};
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a K x Q grid; writes CSV (k,q,mean_acc,ci95)");
  add_eval_flags(*sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--k-list", k_list, "support sizes")->delimiter(',');
  sweep_cmd->add_option("--q-list", q_list, "query sizes")->delimiter(',');
  sweep_cmd->add_option("--out", sweep_flags.out, "CSV path ('-' = stdout)");

  std::string fixtures_path;
  std::optional<double> rho;
  FixtureOptions loss_opts;
  auto* losses = app.add_subcommand("losses", "evaluate loss kernels on a JSON fixture file");
  losses->add_option("--fixtures", fixtures_path, "fixture JSON")->required();
  losses->add_option("--rho", rho, "pseudo-pair selection ratio for fixtures with a pair_batch");
  losses->add_flag("--normalize", loss_opts.normalize, "L_patch / masked count and L_MSE / element count instead of raw sums");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorClass::Config);
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*synth) return cmd_synth(synth_spec, patches, synth_out);
    if (*eval) return cmd_eval(eval_flags);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, k_list, q_list);
    if (*losses) {
      loss_opts.rho = rho;
      return cmd_losses(fixtures_path, loss_opts);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(error_class(e.code()));
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return exit_code(ErrorClass::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorClass::Data);
  }
  return 0;
}
