// grail: command-line driver for the gaze-guided relational imitation
// learning pipeline. Verbs: gen-data, train, eval, inspect, sweep,
// generalize. Every verb honors --seed and is bit-reproducible; exit
// codes are 0 (success), 1 (runtime failure), 2 (usage error).

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "grail/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::string records_path_of(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "records.jsonl").string();
  return data;
}

grail::SpuriousMode spurious_mode_of(const std::string& s) {
  if (s == "off") return grail::SpuriousMode::None;
  if (s == "correlated") return grail::SpuriousMode::Correlated;
  if (s == "randomized") return grail::SpuriousMode::Randomized;
  throw CLI::ValidationError("--spurious", "must be off, correlated or randomized");
}

struct CommonOpts {
  std::string env = "asterix-mini";
  std::uint64_t seed = 0;
  int objects = 1;
  int seeds = 50;
  int jobs = 1;
};

int cmd_gen_data(const CommonOpts& c, int episodes, const std::string& out,
                 const std::string& rules_path, const std::string& spurious) {
  grail::SpuriousMode mode = spurious_mode_of(spurious);
  grail::EnvConfig env = grail::env_config_for(c.env, c.objects,
                                               mode == grail::SpuriousMode::None ? 0 : 1);
  env.seed = c.seed;
  if (mode != grail::SpuriousMode::None) {
    // the ablation's gaze channel carries the pure attention signal
    env.p_noise = 0.0;
  }
  std::string rules_text =
      rules_path.empty()
          ? grail::read_text_file(std::string(GRAIL_DATA_DIR) + "/" +
                                  (c.env == "seaquest-mini" ? "seaquest.rules" : "asterix.rules"))
          : grail::read_text_file(rules_path);
  grail::RuleBase rb =
      grail::parse_rulebase(rules_text, grail::signatures_for_env(c.env));
  grail::Dataset ds = grail::generate_dataset(env, episodes, rb, mode);
  fs::create_directories(out);
  grail::write_dataset(ds, (fs::path(out) / "records.jsonl").string(),
                       (fs::path(out) / "stats.json").string());
  std::cout << "wrote " << ds.records.size() << " records from " << episodes
            << " episodes to " << out << "\n";
  return 0;
}

int cmd_train(const CommonOpts& c, const std::string& rules_path, const std::string& data,
              const std::string& out, bool no_gaze, double fraction, double lr) {
  grail::Dataset ds = grail::read_dataset(records_path_of(data));
  grail::EnvConfig env = ds.cfg;
  grail::CompiledRules cr = grail::load_rules(rules_path, env.env_name, env.inventory());
  if (fraction < 1.0) ds = grail::subsample_trajectories(ds, fraction, c.seed + 17);

  grail::TrainConfig tc;
  tc.seed = c.seed;
  if (lr > 0) tc.learning_rate = lr;
  grail::ReasonerConfig rcfg;
  grail::TrainReport rep = grail::train_on_dataset(ds, cr, tc, rcfg, !no_gaze);

  fs::create_directories(out);
  grail::write_text_file(
      (fs::path(out) / "weights.txt").string(),
      grail::format_weight_file(cr.rb, rep.final_weights, rcfg, cr.rules_text));
  grail::write_text_file((fs::path(out) / "train_report.jsonl").string(),
                         grail::format_train_report(rep));
  std::cout << "trained " << (no_gaze ? "nsfr-il" : "grail") << " on " << ds.records.size()
            << " samples (" << ds.stats.trajectories << " trajectories, fraction=" << fraction
            << ")\n"
            << "best validation loss " << rep.best_val_loss << " (" << rep.stopping_reason
            << " after " << rep.epochs.size() << " epochs)\n"
            << "weights written to " << (fs::path(out) / "weights.txt").string() << "\n";
  return 0;
}

grail::ClauseWeights load_weights(const std::string& weights_path,
                                  const grail::CompiledRules& cr) {
  grail::WeightFile wf = grail::parse_weight_file(grail::read_text_file(weights_path));
  return grail::weights_from_file(wf, cr.rules_text);
}

int cmd_eval(const CommonOpts& c, const std::string& rules_path, const std::string& weights_path,
             const std::string& data, const std::string& out) {
  grail::EnvConfig env = grail::env_config_for(c.env, c.objects);
  env.seed = c.seed;
  grail::CompiledRules cr = grail::load_rules(rules_path, c.env, env.inventory());
  grail::ClauseWeights w = load_weights(weights_path, cr);
  grail::ReasonerConfig rcfg;

  grail::ResultRow row;
  row.method = "policy";
  row.cell = c.env + ",objects=" + std::to_string(c.objects);
  grail::PolicyEvalResult ev = grail::evaluate_policy(cr.rb, w, rcfg, env, c.seeds);
  row.mean_score = ev.mean_score;
  row.std_score = ev.std_score;
  row.n_seeds = c.seeds;
  if (!data.empty()) {
    grail::Dataset eval_ds = grail::read_dataset(records_path_of(data));
    row.accuracy = grail::heldout_accuracy(eval_ds, cr, w, rcfg);
  }
  grail::ResultsTable table;
  table.rows.push_back(row);
  std::cout << table.render();
  std::cout << "score: " << row.mean_score << " +/- " << row.std_score << " over " << c.seeds
            << " seeds\n";
  if (!out.empty()) {
    fs::create_directories(out);
    grail::write_text_file((fs::path(out) / "eval.jsonl").string(), table.to_jsonl());
  }
  return 0;
}

int cmd_inspect(const CommonOpts& c, const std::string& rules_path,
                const std::string& weights_path) {
  grail::EnvConfig env = grail::env_config_for(c.env, c.objects);
  grail::CompiledRules cr = grail::load_rules(rules_path, c.env, env.inventory());
  grail::ClauseWeights w = load_weights(weights_path, cr);
  std::cout << grail::inspect_table(cr.rb, w);
  return 0;
}

int cmd_sweep(const CommonOpts& c, const std::string& rules_path, const std::string& data,
              const std::string& out, std::vector<double> fractions) {
  grail::Dataset train_ds = grail::read_dataset(records_path_of(data));
  grail::EnvConfig env = train_ds.cfg;
  grail::CompiledRules cr = grail::load_rules(rules_path, env.env_name, env.inventory());

  // held-out episodes come from a shifted generation seed
  grail::EnvConfig eval_env = grail::env_config_for(env.env_name, c.objects);
  eval_env.seed = c.seed + 104729;
  grail::Dataset eval_ds = grail::generate_dataset(
      eval_env, 20, grail::parse_rulebase(cr.rules_text, grail::signatures_for_env(env.env_name)));

  grail::TrainConfig tc;
  tc.seed = c.seed;
  grail::SweepOptions opts;
  if (!fractions.empty()) opts.fractions = std::move(fractions);
  opts.eval_seeds = c.seeds;
  opts.jobs = c.jobs;
  grail::EnvConfig rollout_env = grail::env_config_for(env.env_name, c.objects);
  grail::ResultsTable table =
      grail::run_sweep(train_ds, eval_ds, cr, tc, grail::ReasonerConfig{}, rollout_env, opts);
  std::cout << table.render();
  if (!out.empty()) {
    fs::create_directories(out);
    grail::write_text_file((fs::path(out) / "sweep.jsonl").string(), table.to_jsonl());
    // plot-ready: fraction <tab> method <tab> accuracy <tab> mean_score
    std::ostringstream tsv;
    tsv << "fraction\tmethod\taccuracy\tmean_score\n";
    for (const auto& r : table.rows) {
      std::string f = r.cell.substr(r.cell.find('=') + 1);
      tsv << f << '\t' << r.method << '\t' << r.accuracy << '\t' << r.mean_score << "\n";
    }
    grail::write_text_file((fs::path(out) / "sweep.tsv").string(), tsv.str());
  }
  return 0;
}

int cmd_generalize(const CommonOpts& c, const std::string& rules_path, int episodes,
                   const std::string& out) {
  grail::EnvConfig env = grail::env_config_for(c.env);
  env.seed = c.seed;
  grail::TrainConfig tc;
  tc.seed = c.seed;
  grail::GeneralizeOptions opts;
  opts.episodes = episodes;
  opts.eval_seeds = c.seeds;
  opts.jobs = c.jobs;
  grail::ResultsTable table = grail::run_generalize(
      grail::read_text_file(rules_path), env, tc, grail::ReasonerConfig{}, opts);
  std::cout << table.render();
  if (!out.empty()) {
    fs::create_directories(out);
    grail::write_text_file((fs::path(out) / "generalize.jsonl").string(), table.to_jsonl());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaze-guided relational imitation learning"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value experiment config; flags win");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  CommonOpts c;
  app.add_option("--env", c.env, "environment name")->capture_default_str();
  app.add_option("--seed", c.seed, "master seed")->capture_default_str();
  app.add_option("--objects", c.objects, "objects per non-player type")->capture_default_str();
  app.add_option("--seeds", c.seeds, "evaluation rollout seeds")->capture_default_str();
  app.add_option("--jobs", c.jobs, "parallel cells for sweep/generalize")->capture_default_str();

  std::string rules, data, out, weights, spurious = "off";
  int episodes = 60;
  bool no_gaze = false;
  double fraction = 1.0, lr = -1;

  auto* gen = app.add_subcommand("gen-data", "roll the scripted expert into a dataset");
  gen->add_option("--episodes", episodes, "episodes to generate")->capture_default_str();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--rules", rules, "expert rule file (default: the shipped rule base)");
  gen->add_option("--spurious", spurious, "off|correlated|randomized distractor")
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "behavior-clone clause weights from a dataset");
  train->add_option("--rules", rules, "rule file")->required();
  train->add_option("--data", data, "dataset directory or records file")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_flag("--no-gaze", no_gaze, "ablation: skip gaze modulation (NSFR-IL)");
  train->add_option("--fraction", fraction, "trajectory fraction in (0,1]")
      ->capture_default_str();
  train->add_option("--lr", lr, "override the default learning rate");

  auto* eval = app.add_subcommand("eval", "greedy-rollout evaluation of trained weights");
  eval->add_option("--rules", rules, "rule file")->required();
  eval->add_option("--weights", weights, "weight file")->required();
  eval->add_option("--data", data, "optional held-out dataset for action accuracy");
  eval->add_option("--out", out, "optional output directory");

  auto* inspect = app.add_subcommand("inspect", "print rules sorted by learned weight");
  inspect->add_option("--rules", rules, "rule file")->required();
  inspect->add_option("--weights", weights, "weight file")->required();

  auto* sweep = app.add_subcommand("sweep", "sample-efficiency sweep over dataset fractions");
  std::vector<double> fractions;
  sweep->add_option("--rules", rules, "rule file")->required();
  sweep->add_option("--data", data, "dataset directory or records file")->required();
  sweep->add_option("--out", out, "optional output directory");
  sweep->add_option("--fraction", fractions, "fractions to sweep (default 0.1..1.0)");

  auto* gener = app.add_subcommand("generalize", "train/eval across object counts");
  gener->add_option("--rules", rules, "rule file")->required();
  gener->add_option("--episodes", episodes, "training episodes per count")
      ->capture_default_str();
  gener->add_option("--out", out, "optional output directory");

  // common flags may appear after the verb
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(c, episodes, out, rules, spurious);
    if (train->parsed()) return cmd_train(c, rules, data, out, no_gaze, fraction, lr);
    if (eval->parsed()) return cmd_eval(c, rules, weights, data, out);
    if (inspect->parsed()) return cmd_inspect(c, rules, weights);
    if (sweep->parsed()) return cmd_sweep(c, rules, data, out, fractions);
    if (gener->parsed()) return cmd_generalize(c, rules, episodes, out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
