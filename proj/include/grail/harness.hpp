#pragma once

// Experiment plumbing shared by the CLI and the test suites: loading rule
// files, turning datasets into training samples (with or without gaze
// modulation), trajectory subsampling, result tables, and the sweep /
// generalization protocols.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "grail/envs.hpp"
#include "grail/learning.hpp"

namespace grail {

inline SignatureSet signatures_for_env(const std::string& env_name) {
  if (env_name == "asterix-mini" || env_name == "freeway") return asterix_signatures();
  if (env_name == "seaquest-mini") return seaquest_signatures();
  throw std::runtime_error("no signature set for environment '" + env_name + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path);
}

// A rule file compiled against a concrete inventory.
struct CompiledRules {
  RuleBase rb;
  std::string rules_text;
  AtomIndex idx;
  InferenceGraph graph;
  ObjectInventory inv;

  int action_index_of(Action a) const {
    for (std::size_t i = 0; i < graph.actions.size(); ++i) {
      if (graph.actions[i] == a) return static_cast<int>(i);
    }
    return -1;
  }
};

inline CompiledRules compile_rules_text(const std::string& rules_text, const SignatureSet& sigs,
                                        const ObjectInventory& inv) {
  CompiledRules cr;
  cr.rules_text = rules_text;
  cr.rb = parse_rulebase(rules_text, sigs);
  auto diags = validate_rulebase(cr.rb);
  if (has_errors(diags)) {
    std::string msg = "rule base rejected:";
    for (const auto& d : diags) msg += "\n  " + d.message;
    throw std::runtime_error(msg);
  }
  cr.inv = inv;
  cr.idx = build_atom_index(cr.rb, inv);
  cr.graph = compile(cr.rb, cr.idx, inv);
  return cr;
}

inline CompiledRules load_rules(const std::string& path, const std::string& env_name,
                                const ObjectInventory& inv) {
  return compile_rules_text(read_text_file(path), signatures_for_env(env_name), inv);
}

// --- dataset -> training samples --------------------------------------

// Grounds every recorded state and optionally applies gaze modulation
// from the recorded fixations before training sees the valuations.
inline std::vector<TrainSample> build_training_samples(const Dataset& ds, const CompiledRules& cr,
                                                       bool use_gaze,
                                                       double gaze_sigma = kDefaultGazeSigma) {
  std::vector<TrainSample> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) {
    TrainSample s;
    s.episode_id = rec.episode_id;
    ValuationVector v0 = ground_valuation(rec.state, ds.cfg.predicates, cr.idx, cr.inv);
    if (use_gaze) {
      GazeHeatmap ghat = render_heatmap(rec.fixations, gaze_sigma,
                                        static_cast<int>(rec.state.frame_h),
                                        static_cast<int>(rec.state.frame_w));
      s.valuation = modulate_valuation(v0, ghat, cr.idx, rec.state,
                                       entity_boxes(rec.state));
    } else {
      s.valuation = std::move(v0);
    }
    s.action_index = cr.action_index_of(rec.action);
    if (s.action_index < 0) {
      throw std::runtime_error("episode " + std::to_string(rec.episode_id) + " step " +
                               std::to_string(rec.t) + ": expert action '" +
                               action_name(rec.action) +
                               "' is not covered by any rule head");
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Q2 subsampling is by trajectory: keep a seeded fraction of episodes.
inline Dataset subsample_trajectories(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw std::runtime_error("fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return ds;
  std::vector<int> episodes;
  for (const auto& r : ds.records) {
    if (std::find(episodes.begin(), episodes.end(), r.episode_id) == episodes.end())
      episodes.push_back(r.episode_id);
  }
  Rng rng(seed);
  rng.shuffle(episodes);
  std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(episodes.size()))));
  episodes.resize(keep);
  Dataset out;
  out.cfg = ds.cfg;
  for (const auto& r : ds.records) {
    if (std::find(episodes.begin(), episodes.end(), r.episode_id) != episodes.end())
      out.records.push_back(r);
  }
  for (const auto& e : ds.episodes) {
    if (std::find(episodes.begin(), episodes.end(), e.episode_id) != episodes.end())
      out.episodes.push_back(e);
  }
  out.stats = ds.stats;
  out.stats.samples = out.records.size();
  out.stats.trajectories = keep;
  return out;
}

// --- reports and tables -----------------------------------------------

// Epoch log plus summary, one JSON object per line. Wall-clock time is
// deliberately omitted so report files are byte-reproducible.
inline std::string format_train_report(const TrainReport& r) {
  std::ostringstream os;
  for (const auto& e : r.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    j["lr"] = e.learning_rate;
    os << j.dump() << "\n";
  }
  nlohmann::ordered_json js;
  js["stopping_reason"] = r.stopping_reason;
  js["best_val_loss"] = r.best_val_loss;
  js["init_val_loss"] = r.init_val_loss;
  js["train_samples"] = r.train_samples;
  js["val_samples"] = r.val_samples;
  js["epochs_run"] = r.epochs.size();
  os << js.dump() << "\n";
  return os.str();
}

struct ResultRow {
  std::string method;
  std::string cell;  // free-form label, e.g. "fraction=0.25" or "train=1,eval=3"
  double mean_score = 0;
  double std_score = 0;
  int n_seeds = 0;
  double accuracy = -1;  // < 0 when not measured
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  std::string render() const {
    std::ostringstream os;
    os << std::left << std::setw(10) << "method" << std::setw(22) << "cell" << std::setw(20)
       << "score (mean +/- std)" << std::setw(8) << "seeds" << "accuracy\n";
    for (const auto& r : rows) {
      std::ostringstream score;
      score << std::fixed << std::setprecision(1) << r.mean_score << " +/- " << r.std_score;
      os << std::left << std::setw(10) << r.method << std::setw(22) << r.cell << std::setw(20)
         << score.str() << std::setw(8) << r.n_seeds;
      if (r.accuracy >= 0) {
        os << std::fixed << std::setprecision(4) << r.accuracy;
      } else {
        os << "-";
      }
      os << "\n";
    }
    return os.str();
  }

  std::string to_jsonl() const {
    std::ostringstream os;
    for (const auto& r : rows) {
      nlohmann::ordered_json j;
      j["method"] = r.method;
      j["cell"] = r.cell;
      j["mean_score"] = r.mean_score;
      j["std_score"] = r.std_score;
      j["n_seeds"] = r.n_seeds;
      if (r.accuracy >= 0) j["accuracy"] = r.accuracy;
      os << j.dump() << "\n";
    }
    return os.str();
  }
};

// --- weight inspection ------------------------------------------------

// The first two body predicates that are not bookkeeping (type / visible)
// summarize what a rule reacts to.
inline std::string primary_condition(const Clause& c) {
  std::string out;
  int taken = 0;
  for (const auto& a : c.body) {
    if (a.predicate == "type" || a.predicate.rfind("visible", 0) == 0) continue;
    if (taken > 0) out += ", ";
    out += a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i > 0) out += ",";
      out += a.args[i].name;
    }
    out += ")";
    if (++taken == 2) break;
  }
  return out.empty() ? "-" : out;
}

// Rules sorted by descending learned weight.
inline std::string inspect_table(const RuleBase& rb, const ClauseWeights& weights) {
  std::vector<std::size_t> order(rb.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&weights](std::size_t a, std::size_t b) {
    return weights.w[a] > weights.w[b];
  });
  std::ostringstream os;
  os << std::left << std::setw(22) << "Rule" << std::setw(44) << "Primary condition"
     << "Weight\n";
  for (std::size_t i : order) {
    os << std::left << std::setw(22) << rb.clauses[i].head.predicate << std::setw(44)
       << primary_condition(rb.clauses[i]) << std::fixed << std::setprecision(4) << weights.w[i]
       << "\n";
  }
  return os.str();
}

// --- experiment protocols ---------------------------------------------

inline TrainReport train_on_dataset(const Dataset& ds, const CompiledRules& cr,
                                    const TrainConfig& tc, const ReasonerConfig& rcfg,
                                    bool use_gaze) {
  return train(build_training_samples(ds, cr, use_gaze), cr.graph, rcfg, tc);
}

// Accuracy on held-out demonstration frames. `use_gaze` selects the input
// representation: false scores the policy the way rollouts run it (no gaze
// channel); true scores a gaze-trained model on the recorded fixations the
// held-out demonstrations carry.
inline double heldout_accuracy(const Dataset& eval_ds, const CompiledRules& cr,
                               const ClauseWeights& w, const ReasonerConfig& rcfg,
                               bool use_gaze = false) {
  return action_accuracy(build_training_samples(eval_ds, cr, use_gaze), w, cr.graph, rcfg);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; cell outputs only
// depend on i, so the schedule cannot change results.
inline void parallel_cells(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(width);
  for (std::size_t w = 0; w < width; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += width) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct SweepOptions {
  std::vector<double> fractions = {0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> methods = {"grail", "nsfr-il"};
  int eval_seeds = 50;
  int jobs = 1;
};

// Q2 protocol: train each method at each dataset fraction, then measure
// held-out accuracy and greedy-rollout score.
inline ResultsTable run_sweep(const Dataset& train_ds, const Dataset& eval_ds,
                              const CompiledRules& cr, const TrainConfig& tc,
                              const ReasonerConfig& rcfg, const EnvConfig& env,
                              const SweepOptions& opts) {
  struct Cell {
    std::string method;
    double fraction;
  };
  std::vector<Cell> cells;
  for (const auto& m : opts.methods) {
    for (double f : opts.fractions) cells.push_back({m, f});
  }
  std::vector<ResultRow> rows(cells.size());
  parallel_cells(cells.size(), opts.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    Dataset sub = subsample_trajectories(train_ds, c.fraction, tc.seed + 17);
    TrainReport rep = train_on_dataset(sub, cr, tc, rcfg, c.method == "grail");
    PolicyEvalResult ev =
        evaluate_policy(cr.rb, rep.final_weights, rcfg, env, opts.eval_seeds);
    std::ostringstream cell;
    cell << "fraction=" << c.fraction;
    rows[i] = {c.method, cell.str(), ev.mean_score, ev.std_score, opts.eval_seeds,
               heldout_accuracy(eval_ds, cr, rep.final_weights, rcfg)};
  });
  ResultsTable table;
  table.rows = std::move(rows);
  return table;
}

struct GeneralizeOptions {
  std::vector<int> train_counts = {1, 2};
  std::vector<int> eval_counts = {1, 2, 3};
  int episodes = 60;
  int eval_seeds = 50;
  int jobs = 1;
};

// Q3 protocol: train at small object counts, evaluate the same weights
// at larger ones. The rule base is relational, so weights transfer.
inline ResultsTable run_generalize(const std::string& rules_text, const EnvConfig& base_env,
                                   const TrainConfig& tc, const ReasonerConfig& rcfg,
                                   const GeneralizeOptions& opts) {
  ResultsTable table;
  for (int tc_count : opts.train_counts) {
    EnvConfig train_env = base_env;
    train_env.objects_per_type = tc_count;
    CompiledRules cr = compile_rules_text(rules_text, signatures_for_env(base_env.env_name),
                                          train_env.inventory());
    RuleBase expert_rb = cr.rb;
    Dataset ds = generate_dataset(train_env, opts.episodes, expert_rb);
    TrainReport rep = train_on_dataset(ds, cr, tc, rcfg, /*use_gaze=*/true);

    std::vector<ResultRow> rows(opts.eval_counts.size());
    parallel_cells(opts.eval_counts.size(), opts.jobs, [&](std::size_t i) {
      int ec = opts.eval_counts[i];
      EnvConfig eval_env = base_env;
      eval_env.objects_per_type = ec;
      CompiledRules eval_cr = compile_rules_text(
          rules_text, signatures_for_env(base_env.env_name), eval_env.inventory());
      PolicyEvalResult ev =
          evaluate_policy(eval_cr.rb, rep.final_weights, rcfg, eval_env, opts.eval_seeds);
      std::ostringstream cell;
      cell << "train=" << tc_count << ",eval=" << ec;
      rows[i] = {"grail", cell.str(), ev.mean_score, ev.std_score, opts.eval_seeds, -1};
    });
    for (auto& r : rows) table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace grail
