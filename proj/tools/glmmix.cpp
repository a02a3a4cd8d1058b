// glmmix: generate, learn, evaluate and sweep mixtures of GLMs.
//
// Exit codes: 0 success, 1 threshold failure, 2 usage or input error,
// 3 under-recovery.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "glmmix/evaluation.hpp"
#include "glmmix/io.hpp"
#include "glmmix/pipeline.hpp"
#include "glmmix/rng.hpp"
#include "glmmix/synthetic.hpp"

namespace fs = std::filesystem;
using namespace glmmix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitThreshold = 1;
constexpr int kExitUsage = 2;
constexpr int kExitUnderRecovery = 3;

struct Overrides {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<Index> n, d, r;
  std::optional<std::string> activation;
  std::optional<int> L, N;
  std::optional<double> nu, threshold;
  std::optional<std::string> out;
  std::optional<int> trials;
  std::vector<Index> n_values;
};

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  if (name.empty() || name == "default") return c;
  if (name == "paper-scaling") {
    c.d = 10;
    c.r = 3;
    c.activation = "cubic";
    c.noise_sigma = 0.1;
    c.n_values = {10000, 30000, 100000, 300000, 1000000};
    c.trials = 5;
    c.run_em = false;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (known: default, paper-scaling)");
}

ExperimentConfig resolve_config(const Overrides& o) {
  ExperimentConfig c = preset_config(o.preset);
  if (!o.config_path.empty()) c = config_from_json(read_json_file(o.config_path), c);
  if (o.seed) c.master_seed = *o.seed;
  if (o.mode) c.mode = *o.mode;
  if (o.n) c.n = *o.n;
  if (o.d) c.d = *o.d;
  if (o.r) c.r = *o.r;
  if (o.activation) c.activation = *o.activation;
  if (o.L) c.decomposition.restarts = *o.L;
  if (o.N) c.decomposition.iterations = *o.N;
  if (o.nu) c.decomposition.nu = *o.nu;
  if (o.threshold) c.threshold = *o.threshold;
  if (o.out) c.output_dir = *o.out;
  if (o.trials) c.trials = *o.trials;
  if (!o.n_values.empty()) c.n_values = o.n_values;
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config");
  cmd->add_option("--preset", o.preset, "named config preset (default, paper-scaling)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--mode", o.mode, "glm | regression | auto")->check(CLI::IsMember({"glm", "regression", "auto"}));
  cmd->add_option("--n", o.n, "sample count");
  cmd->add_option("--d", o.d, "input dimension");
  cmd->add_option("--r", o.r, "number of components");
  cmd->add_option("--activation", o.activation, "linear | cubic | logistic | tanh");
  cmd->add_option("--L", o.L, "power method restarts");
  cmd->add_option("--N", o.N, "power iterations");
  cmd->add_option("--nu", o.nu, "pruning threshold");
  cmd->add_option("--threshold", o.threshold, "error threshold");
  cmd->add_option("--out", o.out, "output directory");
}

fs::path prepare_output(const ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + c.output_dir + "'");
  return dir;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_gen(const Overrides& o) {
  const ExperimentConfig c = resolve_config(o);
  const fs::path dir = prepare_output(c);
  const GlmMixture model = truth_model(c, stream_seed(c.master_seed, "model"));
  const Dataset data = sample(model, base_input(c), c.n, stream_seed(c.master_seed, "data"));
  std::ostringstream csv;
  write_csv(data, csv);
  write_text_file((dir / "model.json").string(), dump(to_json(model)));
  write_text_file((dir / "data.csv").string(), csv.str());
  write_text_file((dir / "score.json").string(), dump(to_json(learning_score(c))));
  return kExitOk;
}

int cmd_learn(const Overrides& o, const std::string& data_path, const std::string& score_path) {
  ExperimentConfig c = resolve_config(o);
  const Dataset data = read_dataset_file(data_path);
  ScoreModel score = score_path.empty() ? ScoreModel::standard_gaussian(data.dim())
                                        : score_model_from_json(read_json_file(score_path));
  if (score.dim() != data.dim()) {
    std::ostringstream os;
    os << "score dimension " << score.dim() << " does not match data dimension " << data.dim();
    throw std::invalid_argument(os.str());
  }
  if (const auto* t = score.as_transformed()) c.transform = t->map;
  c.d = data.dim();
  c.n = data.size();
  c.validate();
  const fs::path dir = prepare_output(c);
  const LearnResult result = learn(data, score, c, stream_seed(c.master_seed, "learn"));

  json learned = to_json(result.refined);
  if (!result.ok()) learned["error"] = result.error;
  json diag;
  diag["mode"] = to_string(result.mode);
  diag["residual_fro"] = result.decomposition.residual_fro;
  diag["restarts"] = result.decomposition.n_restarts_used;
  diag["whitening_attempts"] = result.decomposition.whitening_attempts;
  diag["coefficients"] = to_json(result.decomposition)["coefficients"];
  json rhos = json::array();
  for (Index j = 0; j < result.rho_values.size(); ++j) rhos.push_back(result.rho_values(j));
  diag["rho_values"] = rhos;
  diag["initial"] = to_json(result.initial);
  if (result.em) {
    diag["em"] = {{"iterations", result.em->iterations},
                  {"converged", result.em->converged},
                  {"collapsed", result.em->collapsed},
                  {"loglik", result.em->state.loglik},
                  {"loglik_trace", result.em->loglik_trace},
                  {"warnings", result.em->warnings}};
  }
  diag["error"] = result.ok() ? json(nullptr) : json(result.error);
  write_text_file((dir / "learned.json").string(), dump(learned));
  write_text_file((dir / "diagnostics.json").string(), dump(diag));
  if (!result.ok()) {
    std::cerr << "glmmix learn: " << result.error << "\n";
    return kExitUnderRecovery;
  }
  return kExitOk;
}

int cmd_eval(const std::string& truth_path, const std::string& learned_path, double threshold) {
  const GlmMixture truth = glm_mixture_from_json(read_json_file(truth_path));
  const GlmMixture learned = glm_mixture_from_json(read_json_file(learned_path));
  if (truth.U.rows() != learned.U.rows() || truth.U.cols() != learned.U.cols()) {
    std::ostringstream os;
    os << "shape mismatch: truth is " << truth.U.rows() << "x" << truth.U.cols() << ", learned is "
       << learned.U.rows() << "x" << learned.U.cols();
    throw std::invalid_argument(os.str());
  }
  const MatchReport report = match(normalize_columns(truth.U), normalize_columns(learned.U));
  std::cout << dump(to_json(report));
  return report.max_error <= threshold ? kExitOk : kExitThreshold;
}

int cmd_sweep(const Overrides& o) {
  const ExperimentConfig c = resolve_config(o);
  if (c.n_values.empty()) throw std::invalid_argument("sweep: empty n list");
  const fs::path dir = prepare_output(c);
  const SweepResult result = sweep(c);
  for (const auto& w : result.warnings) std::cerr << "glmmix sweep: warning: " << w << "\n";
  write_text_file((dir / "sweep.csv").string(), sweep_csv(result));
  write_text_file((dir / "summary.json").string(), dump(sweep_summary_json(result)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixtures of generalized linear models via score-function moments"};
  app.require_subcommand(1);

  Overrides gen_o, learn_o, sweep_o;
  auto* gen = app.add_subcommand("gen", "sample a random model and dataset");
  add_common(gen, gen_o);

  auto* learn_cmd = app.add_subcommand("learn", "estimate a model from data");
  add_common(learn_cmd, learn_o);
  std::string data_path, score_path;
  learn_cmd->add_option("--data", data_path, "dataset (CSV or binary)")->required();
  learn_cmd->add_option("--score", score_path, "input distribution JSON (default N(0, I))");

  auto* eval = app.add_subcommand("eval", "match a learned model against the truth");
  std::string truth_path, learned_path;
  double threshold = 0.1;
  eval->add_option("--truth", truth_path, "true model JSON")->required();
  eval->add_option("--learned", learned_path, "learned model JSON")->required();
  eval->add_option("--threshold", threshold, "max error for exit 0");

  auto* sweep_cmd = app.add_subcommand("sweep", "error versus sample size");
  add_common(sweep_cmd, sweep_o);
  sweep_cmd->add_option("--trials", sweep_o.trials, "trials per n");
  sweep_cmd->add_option("--n-values", sweep_o.n_values, "sample sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_o);
    if (learn_cmd->parsed()) return cmd_learn(learn_o, data_path, score_path);
    if (eval->parsed()) return cmd_eval(truth_path, learned_path, threshold);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_o);
  } catch (const UnderRecoveryError& e) {
    std::cerr << "glmmix: " << e.what() << "\n";
    return kExitUnderRecovery;
  } catch (const SweepError& e) {
    std::cerr << "glmmix: " << e.what() << "\n";
    return kExitUnderRecovery;
  } catch (const std::exception& e) {
    std::cerr << "glmmix: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
