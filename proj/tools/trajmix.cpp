#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "trajmix/commands.hpp"

namespace {

using namespace trajmix;
using namespace trajmix::cli;

// Flag values as given; unset flags leave the config file's value alone.
struct Flags {
  std::string config;
  std::optional<std::string> output_dir;
  std::optional<std::string> input;
  std::optional<std::string> spec;
  std::optional<std::string> counts;
  std::optional<std::string> trajectories;
  std::optional<std::string> model_path;
  std::optional<std::string> assignments;
  std::optional<std::string> covariates;
  std::optional<int> null_model;
  std::optional<int> k;
  std::optional<std::string> k_range;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> max_iterations;
  std::optional<int> restarts;
  std::optional<double> smoothing;
  std::optional<int> max_gap_days;
  std::optional<std::string> view;
  std::optional<std::string> target;
  std::optional<std::string> beta;
  std::optional<double> split;
  std::optional<std::string> redistribution;
  std::optional<std::size_t> participants;
  std::optional<std::size_t> steps;
  std::optional<double> missingness;
  std::optional<bool> haldane;
  std::optional<int> decimals;
  std::vector<std::string> membership;
  std::vector<std::string> numeric;
  std::optional<std::string> group_by;
};

template <class T, class U>
void override(const std::optional<T>& flag, U& field) {
  if (flag) field = *flag;
}

RunConfig effective_config(const std::string& sub, const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) c = config_from_json(io::read_json(f.config));
  override(f.output_dir, c.output_dir);
  if (sub == "ingest") override(f.input, c.ingest.input);
  if (sub == "pipeline") override(f.input, c.ingest.input);
  override(f.spec, c.simulate.spec);
  override(f.counts, c.residuals.counts);
  override(f.trajectories, c.cluster.trajectories);
  if (f.model_path) {
    c.stationary.model = *f.model_path;
    c.intervene.model = *f.model_path;
  }
  override(f.assignments, c.associate.assignments);
  override(f.covariates, c.associate.covariates);
  override(f.null_model, c.residuals.model);
  if (f.k) c.cluster.k = *f.k;
  if (f.k_range) c.cluster.k_range = parse_k_range(*f.k_range);
  if (f.seed) {
    c.cluster.em.seed = *f.seed;
    c.simulate.seed = *f.seed;
  }
  override(f.epsilon, c.cluster.em.epsilon);
  override(f.max_iterations, c.cluster.em.max_iterations);
  override(f.restarts, c.cluster.em.restarts);
  override(f.smoothing, c.cluster.em.smoothing);
  if (f.max_gap_days) c.cluster.max_gap_days = *f.max_gap_days;
  override(f.view, c.cluster.view);
  if (f.target) c.intervene.target = parse_target(*f.target);
  if (f.beta) c.intervene.beta = parse_beta(*f.beta);
  override(f.split, c.intervene.split);
  if (f.redistribution) c.intervene.redistribution = parse_redistribution(*f.redistribution);
  override(f.participants, c.simulate.participants);
  override(f.steps, c.simulate.steps);
  override(f.missingness, c.simulate.missingness);
  override(f.haldane, c.associate.haldane);
  override(f.decimals, c.associate.decimals);
  if (!f.membership.empty()) c.associate.membership = f.membership;
  if (!f.numeric.empty()) c.associate.numeric = f.numeric;
  if (f.group_by) c.associate.group_by = *f.group_by;
  return c;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file or a manifest from an earlier run");
  app->add_option("--output-dir", f.output_dir, "Directory for outputs and manifest.json");
}

void add_em(CLI::App* app, Flags& f) {
  app->add_option("--trajectories", f.trajectories, "trajectories.csv from ingest");
  app->add_option("--k", f.k, "Number of clusters")->check(CLI::PositiveNumber);
  app->add_option("--k-range", f.k_range, "Fit every K in MIN..MAX and write the NLL table");
  app->add_option("--seed", f.seed, "Seed of the first restart");
  app->add_option("--epsilon", f.epsilon, "Convergence threshold on responsibilities");
  app->add_option("--max-iterations", f.max_iterations, "Iteration cap per restart");
  app->add_option("--restarts", f.restarts, "Random restarts (seeds seed, seed+1, ...)");
  app->add_option("--smoothing", f.smoothing, "Additive pseudo-count in the M-step");
  app->add_option("--max-gap-days", f.max_gap_days, "Skip transitions spanning more than this many days");
  app->add_option("--view", f.view, "State view: reduced or compound");
}

void add_intervention(CLI::App* app, Flags& f) {
  app->add_option("--target", f.target, "mood or pain");
  app->add_option("--beta", f.beta, "Intervention strength, or 'max' for each cluster's feasible maximum");
  app->add_option("--split", f.split, "Share of the displaced mass kept by the better of the two worse states");
  app->add_option("--redistribution", f.redistribution, "fixed or proportional");
}

void add_simulation(CLI::App* app, Flags& f) {
  app->add_option("--spec", f.spec, "Generator spec or model JSON");
  app->add_option("--participants", f.participants, "Number of participants");
  app->add_option("--steps", f.steps, "Days per participant");
  app->add_option("--missingness", f.missingness, "Per-row probability of a missing score");
}

void add_association(CLI::App* app, Flags& f) {
  app->add_option("--covariates", f.covariates, "Covariate CSV keyed by participant_id");
  app->add_flag("--haldane", f.haldane, "Add 0.5 to every cell of tables with a zero cell");
  app->add_option("--decimals", f.decimals, "Decimals in the odds-ratio table");
  app->add_option("--membership", f.membership, "Membership columns (default: every column not named elsewhere)");
  app->add_option("--numeric", f.numeric, "Numeric covariate columns");
  app->add_option("--group-by", f.group_by, "Column whose levels group the numeric summaries");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-of-Markov-chain analysis of daily mood and pain trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Parse raw records into trajectories and transition counts");
  add_common(ingest, f);
  ingest->add_option("--input", f.input, "Raw records CSV");

  auto* residuals = app.add_subcommand("residuals", "Fit a null model to pooled counts and write Pearson residuals");
  add_common(residuals, f);
  residuals->add_option("--counts", f.counts, "Count matrix CSV");
  residuals->add_option("--model", f.null_model, "Null model: 1 or 2");

  auto* cluster = app.add_subcommand("cluster", "Fit a mixture of Markov chains by EM");
  add_common(cluster, f);
  add_em(cluster, f);

  auto* stat = app.add_subcommand("stationary", "Stationary distribution of every cluster");
  add_common(stat, f);
  stat->add_option("--model", f.model_path, "model.json from cluster");

  auto* intervene = app.add_subcommand("intervene", "Apply a mood or pain intervention and compare stationary distributions");
  add_common(intervene, f);
  intervene->add_option("--model", f.model_path, "model.json from cluster");
  add_intervention(intervene, f);

  auto* associate = app.add_subcommand("associate", "Odds ratios and proportions of covariates by cluster");
  add_common(associate, f);
  associate->add_option("--assignments", f.assignments, "assignments.csv from cluster");
  add_association(associate, f);

  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic cohort from a known mixture");
  add_common(simulate, f);
  add_simulation(simulate, f);
  simulate->add_option("--seed", f.seed, "Random seed");

  auto* pipeline = app.add_subcommand("pipeline", "simulate -> ingest -> residuals -> cluster -> stationary -> intervene -> associate");
  add_common(pipeline, f);
  pipeline->add_option("--input", f.input, "Raw records CSV (when not simulating)");
  pipeline->add_option("--model", f.null_model, "Null model for the residual step: 1 or 2");
  add_em(pipeline, f);
  add_intervention(pipeline, f);
  add_simulation(pipeline, f);
  add_association(pipeline, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : ExitCode::usage;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = effective_config(sub, f);
    RunContext ctx(cfg.output_dir);
    if (sub == "ingest") cmd_ingest(cfg, ctx);
    else if (sub == "residuals") cmd_residuals(cfg, ctx);
    else if (sub == "cluster") cmd_cluster(cfg, ctx);
    else if (sub == "stationary") cmd_stationary(cfg, ctx);
    else if (sub == "intervene") cmd_intervene(cfg, ctx);
    else if (sub == "associate") cmd_associate(cfg, ctx);
    else if (sub == "simulate") cmd_simulate(cfg, ctx);
    else cmd_pipeline(cfg, ctx);
    write_manifest(sub, cfg, ctx);
  } catch (const UsageError& e) {
    std::cerr << "trajmix: usage error: " << e.what() << '\n';
    return ExitCode::usage;
  } catch (const Error& e) {
    std::cerr << "trajmix: " << errc_name(e.code()) << " error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "trajmix: schema error: " << e.what() << '\n';
    return ExitCode::schema_error;
  }
  return ExitCode::ok;
}
