#pragma once

// Behavior cloning of the clause weights: batched NLL loss and exact
// gradients, Adam with norm clipping and [0,1] projection, plateau LR
// scheduling, early stopping and a trajectory-level validation split.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "grail/reasoner.hpp"

namespace grail {

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 100;
  double scheduler_factor = 0.5;
  int scheduler_patience = 3;
  int early_stopping_patience = 5;
  double grad_clip_norm = 1.0;
  double validation_fraction = 0.05;
  double improvement_threshold = 1e-5;
  std::uint64_t seed = 0;
  std::vector<double> lr_grid = {0.02, 0.01, 0.001, 0.0005, 0.0001};
};

struct TrainSample {
  ValuationVector valuation;
  int action_index = 0;  // index into the graph's action list
  int episode_id = 0;
};

inline double policy_loss(const std::vector<TrainSample>& batch, const ClauseWeights& weights,
                          const InferenceGraph& g, const ReasonerConfig& cfg) {
  if (batch.empty()) throw std::runtime_error("policy_loss: empty batch");
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ValuationVector vT = forward_chain(batch[i].valuation, weights, g, cfg);
    std::vector<double> pi = policy_distribution(action_scores(vT, g), cfg);
    double p = pi[static_cast<std::size_t>(batch[i].action_index)];
    double loss = -std::log(std::max(p, 1e-300));
    if (!std::isfinite(loss)) {
      throw std::runtime_error("policy_loss: non-finite loss at batch element " +
                               std::to_string(i));
    }
    total += loss;
  }
  return total / static_cast<double>(batch.size());
}

struct BatchGradient {
  double loss = 0;
  std::vector<double> dw;
};

inline BatchGradient policy_grad(const std::vector<TrainSample>& batch,
                                 const ClauseWeights& weights, const InferenceGraph& g,
                                 const ReasonerConfig& cfg) {
  if (batch.empty()) throw std::runtime_error("policy_grad: empty batch");
  BatchGradient out;
  out.dw.assign(g.num_weights, 0.0);
  for (const auto& sample : batch) {
    SampleGradient sg = policy_sample_grad(sample.valuation, weights, g, cfg, sample.action_index);
    out.loss += sg.loss;
    for (std::size_t k = 0; k < out.dw.size(); ++k) out.dw[k] += sg.dw[k];
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& d : out.dw) d *= inv;
  return out;
}

inline std::vector<double> clip_gradient(std::vector<double> grad, double max_norm = 1.0) {
  double sq = 0;
  for (double g : grad) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double scale = max_norm / norm;
    for (auto& g : grad) g *= scale;
  }
  return grad;
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState init(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

// Standard Adam update followed by projection onto [0,1].
inline void adam_step(ClauseWeights& weights, const std::vector<double>& grad, AdamState& state,
                      double lr) {
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < weights.w.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    weights.w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  weights.project();
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double learning_rate = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  ClauseWeights final_weights;
  std::string stopping_reason;
  double best_val_loss = 0;
  double init_val_loss = 0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
  double wall_seconds = 0;  // excluded from determinism comparisons
};

// Seeded, fully deterministic training loop. The validation split is by
// trajectory; the best-validation weights are returned.
inline TrainReport train(const std::vector<TrainSample>& dataset, const InferenceGraph& graph,
                         const ReasonerConfig& rcfg, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::runtime_error("train: empty dataset");
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);

  TrainReport report;
  report.final_weights = ClauseWeights::uniform_init(graph.num_weights, rng);

  // split by episode
  std::vector<int> episodes;
  for (const auto& s : dataset) {
    if (std::find(episodes.begin(), episodes.end(), s.episode_id) == episodes.end()) {
      episodes.push_back(s.episode_id);
    }
  }
  std::vector<int> shuffled = episodes;
  rng.shuffle(shuffled);
  std::size_t n_val_ep = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(episodes.size())));
  if (n_val_ep >= episodes.size()) {
    throw std::runtime_error("train: validation split leaves no training trajectories");
  }
  std::vector<int> val_eps(shuffled.begin(), shuffled.begin() + static_cast<long>(n_val_ep));
  auto is_val = [&val_eps](int ep) {
    return std::find(val_eps.begin(), val_eps.end(), ep) != val_eps.end();
  };
  std::vector<TrainSample> train_set, val_set;
  for (const auto& s : dataset) (is_val(s.episode_id) ? val_set : train_set).push_back(s);
  report.train_samples = train_set.size();
  report.val_samples = val_set.size();
  if (val_set.empty()) throw std::runtime_error("train: empty validation split");

  ClauseWeights weights = report.final_weights;
  ClauseWeights best = weights;
  double best_val = policy_loss(val_set, weights, graph, rcfg);
  report.init_val_loss = best_val;
  report.best_val_loss = best_val;

  AdamState adam = AdamState::init(graph.num_weights);
  double lr = cfg.learning_rate;
  int plateau = 0, stale = 0;
  report.stopping_reason = cfg.max_epochs == 0 ? "max_epochs" : "";

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    std::size_t n_batches = 0;
    std::vector<TrainSample> batch;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      BatchGradient bg;
      try {
        bg = policy_grad(batch, weights, graph, rcfg);
      } catch (const std::exception&) {
        report.stopping_reason = "non_finite_loss";
        report.final_weights = best;
        return report;
      }
      epoch_loss += bg.loss;
      ++n_batches;
      std::vector<double> grad = clip_gradient(std::move(bg.dw), cfg.grad_clip_norm);
      adam_step(weights, grad, adam, lr);
    }
    double val_loss = policy_loss(val_set, weights, graph, rcfg);
    report.epochs.push_back({epoch, epoch_loss / static_cast<double>(std::max<std::size_t>(1, n_batches)),
                             val_loss, lr});
    if (!std::isfinite(val_loss)) {
      report.stopping_reason = "non_finite_loss";
      break;
    }
    if (val_loss < best_val - cfg.improvement_threshold) {
      best_val = val_loss;
      best = weights;
      plateau = 0;
      stale = 0;
    } else {
      ++plateau;
      ++stale;
      if (plateau >= cfg.scheduler_patience) {
        lr *= cfg.scheduler_factor;
        plateau = 0;
      }
      if (stale >= cfg.early_stopping_patience) {
        report.stopping_reason = "early_stopping";
        break;
      }
    }
  }
  if (report.stopping_reason.empty()) report.stopping_reason = "max_epochs";
  report.best_val_loss = best_val;
  report.final_weights = best;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline double action_accuracy(const std::vector<TrainSample>& samples, const ClauseWeights& weights,
                              const InferenceGraph& g, const ReasonerConfig& cfg) {
  if (samples.empty()) return 0;
  std::size_t hits = 0;
  for (const auto& s : samples) {
    ValuationVector vT = forward_chain(s.valuation, weights, g, cfg);
    hits += argmax_action_index(action_scores(vT, g)) == s.action_index;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct GridSearchResult {
  double best_lr = 0;
  std::vector<std::pair<double, double>> scores;  // (lr, best validation loss)
  TrainReport best_report;
};

// Trains once per grid point and keeps the LR with the lowest validation
// loss; exact ties resolve to the lowest LR.
inline GridSearchResult lr_grid_search(const std::vector<TrainSample>& dataset,
                                       const InferenceGraph& graph, const ReasonerConfig& rcfg,
                                       const TrainConfig& cfg) {
  if (cfg.lr_grid.empty()) throw std::runtime_error("lr_grid_search: empty grid");
  std::vector<double> grid = cfg.lr_grid;
  std::sort(grid.begin(), grid.end());
  GridSearchResult out;
  bool first = true;
  for (double lr : grid) {
    TrainConfig c = cfg;
    c.learning_rate = lr;
    TrainReport r = train(dataset, graph, rcfg, c);
    out.scores.emplace_back(lr, r.best_val_loss);
    if (first || r.best_val_loss < out.best_report.best_val_loss) {
      out.best_lr = lr;
      out.best_report = r;
      first = false;
    }
  }
  return out;
}

}  // namespace grail
