#pragma once

// Differentiable weighted forward chaining: a rule base is compiled into a
// ground inference graph, bodies combine by the product t-norm, heads
// aggregate by softor, and action scores come from a hard max over head
// atoms. Includes the exact reverse pass for the clause weights.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "grail/grounding.hpp"

namespace grail {

struct GroundClause {
  int clause_id = -1;
  int weight_slot = -1;
  std::vector<int> body;               // indices into the atom index
  std::vector<int> substitution;       // variable bindings, in first-use order
};

struct HeadEntry {
  int atom = -1;  // ground head atom index
  Action action = Action::Noop;
  std::vector<GroundClause> clauses;
};

struct InferenceGraph {
  std::vector<HeadEntry> heads;
  std::vector<Action> actions;                       // fixed Action order
  std::vector<std::vector<int>> heads_by_action;     // indices into `heads`
  std::size_t num_atoms = 0;
  std::size_t num_weights = 0;

  std::size_t ground_clause_count() const {
    std::size_t n = 0;
    for (const auto& h : heads) n += h.clauses.size();
    return n;
  }
};

struct ClauseWeights {
  std::vector<double> w;

  static ClauseWeights uniform_init(std::size_t m, Rng& rng) {
    ClauseWeights cw;
    cw.w.resize(m);
    for (auto& v : cw.w) v = rng.next_double();
    return cw;
  }

  void project() {
    for (auto& v : w) v = clamp01(v);
  }
};

enum class SoftorKind { LogSumExp, SumClamp };

struct ReasonerConfig {
  int t_max = 2;
  double gamma = 0.01;
  double policy_temperature = 1.0;
  SoftorKind softor = SoftorKind::LogSumExp;
};

// Compiles one ground clause per (clause, type-consistent injective
// substitution). Ground clauses containing a statically false atom
// (a mismatched type constraint) are pruned.
inline InferenceGraph compile(const RuleBase& rb, const AtomIndex& idx,
                              const ObjectInventory& inv) {
  InferenceGraph g;
  g.num_atoms = idx.size();
  g.num_weights = rb.size();

  // head entries, one per head predicate, in atom-index order of creation
  std::map<std::string, int> head_entry_of;
  int player = inv.player_slot();
  auto head_atom_key = [player](const ClauseAtom& head) {
    std::string k = head.predicate;
    k += "(#" + std::to_string(player >= 0 ? player : 0) + ")";
    return k;
  };

  for (std::size_t ci = 0; ci < rb.clauses.size(); ++ci) {
    const Clause& clause = rb.clauses[ci];
    std::string hk = head_atom_key(clause.head);
    int head_atom = idx.find(hk);
    if (head_atom < 0) throw std::runtime_error("head atom missing from index: " + hk);
    if (head_entry_of.find(clause.head.predicate) == head_entry_of.end()) {
      head_entry_of[clause.head.predicate] = static_cast<int>(g.heads.size());
      g.heads.push_back({head_atom, clause.action(), {}});
    }
    HeadEntry& entry = g.heads[static_cast<std::size_t>(head_entry_of[clause.head.predicate])];

    // collect body variables in first-use order with their sort constraints
    std::vector<std::string> vars;
    std::vector<std::vector<Sort>> var_sorts;
    for (const auto& a : clause.body) {
      const auto* sig = rb.signatures.find(a.predicate, static_cast<int>(a.args.size()));
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!a.args[i].is_variable()) continue;
        auto it = std::find(vars.begin(), vars.end(), a.args[i].name);
        std::size_t vi;
        if (it == vars.end()) {
          vars.push_back(a.args[i].name);
          var_sorts.emplace_back();
          vi = vars.size() - 1;
        } else {
          vi = static_cast<std::size_t>(it - vars.begin());
        }
        var_sorts[vi].push_back(sig->arg_sorts[i]);
      }
    }

    std::vector<int> binding(vars.size(), -1);
    std::function<void(std::size_t)> rec = [&](std::size_t vi) {
      if (vi == vars.size()) {
        GroundClause gc;
        gc.clause_id = static_cast<int>(ci);
        gc.weight_slot = clause.weight_slot;
        gc.substitution = binding;
        for (const auto& a : clause.body) {
          std::string key = a.predicate;
          key += '(';
          for (std::size_t i = 0; i < a.args.size(); ++i) {
            if (i > 0) key += ',';
            if (a.args[i].is_variable()) {
              auto it = std::find(vars.begin(), vars.end(), a.args[i].name);
              int slot = binding[static_cast<std::size_t>(it - vars.begin())];
              key += "#" + std::to_string(slot);
            } else {
              key += a.args[i].name;
            }
          }
          key += ')';
          int ai = idx.find(key);
          if (ai < 0) return;  // ungroundable body atom
          // prune statically false type atoms
          const GroundAtom& ga = idx.atoms[static_cast<std::size_t>(ai)];
          if (ga.sem == PredSem::TypeIs &&
              inv.slots[static_cast<std::size_t>(ga.args[0].slot)].type != ga.args[1].constant) {
            return;
          }
          gc.body.push_back(ai);
        }
        entry.clauses.push_back(std::move(gc));
        return;
      }
      for (std::size_t s = 0; s < inv.slots.size(); ++s) {
        bool ok = true;
        for (const auto& sort : var_sorts[vi]) {
          ok = ok && detail::sort_matches_slot(sort, inv.slots[s].type);
        }
        if (!ok) continue;
        if (std::find(binding.begin(), binding.begin() + static_cast<long>(vi),
                      static_cast<int>(s)) != binding.begin() + static_cast<long>(vi)) {
          continue;
        }
        binding[vi] = static_cast<int>(s);
        rec(vi + 1);
        binding[vi] = -1;
      }
    };
    rec(0);
  }

  // stable ordering of head entries by atom index
  std::sort(g.heads.begin(), g.heads.end(),
            [](const HeadEntry& a, const HeadEntry& b) { return a.atom < b.atom; });

  bool present[kNumActions] = {};
  for (const auto& h : g.heads) present[static_cast<int>(h.action)] = true;
  for (int a = 0; a < kNumActions; ++a) {
    if (!present[a]) continue;
    g.actions.push_back(static_cast<Action>(a));
    std::vector<int> hs;
    for (std::size_t h = 0; h < g.heads.size(); ++h) {
      if (g.heads[h].action == static_cast<Action>(a)) hs.push_back(static_cast<int>(h));
    }
    g.heads_by_action.push_back(std::move(hs));
  }

  if (g.ground_clause_count() == 0) {
    throw std::runtime_error("compile: no groundable clause; the policy would be constant");
  }
  return g;
}

// Smooth maximum: min(1, gamma * log sum exp(v_i / gamma)), computed
// overflow-safe. The clamp at 1 reproduces the t-conorm saturation.
inline double softor(const std::vector<double>& values, double gamma,
                     SoftorKind kind = SoftorKind::LogSumExp) {
  if (values.empty()) throw std::runtime_error("softor: empty input");
  if (kind == SoftorKind::SumClamp) {
    double s = 0;
    for (double v : values) s += v;
    return std::min(1.0, s);
  }
  double m = *std::max_element(values.begin(), values.end());
  double acc = 0;
  for (double v : values) acc += std::exp((v - m) / gamma);
  return std::min(1.0, m + gamma * std::log(acc));
}

struct ChainTrace {
  std::vector<ValuationVector> steps;  // steps[0] = input, steps[t_max] = output

  const ValuationVector& final() const { return steps.back(); }
};

inline ChainTrace forward_chain_trace(const ValuationVector& v_in, const ClauseWeights& weights,
                                      const InferenceGraph& g, const ReasonerConfig& cfg) {
  if (v_in.size() != g.num_atoms) throw std::runtime_error("forward_chain: valuation size mismatch");
  ChainTrace trace;
  trace.steps.push_back(v_in);
  std::vector<double> inputs;
  for (int t = 0; t < cfg.t_max; ++t) {
    const ValuationVector& prev = trace.steps.back();
    ValuationVector next = prev;
    for (const auto& h : g.heads) {
      inputs.clear();
      inputs.push_back(prev[static_cast<std::size_t>(h.atom)]);
      for (const auto& gc : h.clauses) {
        double prod = weights.w[static_cast<std::size_t>(gc.weight_slot)];
        for (int b : gc.body) prod *= prev[static_cast<std::size_t>(b)];
        inputs.push_back(prod);
      }
      next[static_cast<std::size_t>(h.atom)] = softor(inputs, cfg.gamma, cfg.softor);
    }
    trace.steps.push_back(std::move(next));
  }
  return trace;
}

inline ValuationVector forward_chain(const ValuationVector& v_in, const ClauseWeights& weights,
                                     const InferenceGraph& g, const ReasonerConfig& cfg) {
  return forward_chain_trace(v_in, weights, g, cfg).final();
}

// Hard max over the head atoms of each action.
inline std::vector<double> action_scores(const ValuationVector& v_final,
                                         const InferenceGraph& g) {
  std::vector<double> s(g.actions.size(), 0.0);
  for (std::size_t a = 0; a < g.actions.size(); ++a) {
    double best = 0.0;
    for (int h : g.heads_by_action[a]) {
      best = std::max(best, v_final[static_cast<std::size_t>(g.heads[static_cast<std::size_t>(h)].atom)]);
    }
    s[a] = best;
  }
  return s;
}

inline std::vector<double> policy_distribution(const std::vector<double>& scores,
                                               const ReasonerConfig& cfg) {
  double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> pi(scores.size());
  double z = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    pi[i] = std::exp((scores[i] - m) / cfg.policy_temperature);
    z += pi[i];
  }
  for (auto& p : pi) p /= z;
  return pi;
}

// Ties broken by lowest action index.
inline int argmax_action_index(const std::vector<double>& scores) {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

namespace detail {

// Derivatives of softor with respect to each input; zero beyond the clamp.
inline void softor_input_grads(const std::vector<double>& inputs, double gamma, SoftorKind kind,
                               std::vector<double>& out) {
  out.assign(inputs.size(), 0.0);
  if (kind == SoftorKind::SumClamp) {
    double s = 0;
    for (double v : inputs) s += v;
    if (s < 1.0) {
      for (auto& o : out) o = 1.0;
    }
    return;
  }
  double m = *std::max_element(inputs.begin(), inputs.end());
  double acc = 0;
  for (double v : inputs) acc += std::exp((v - m) / gamma);
  double pre = m + gamma * std::log(acc);
  if (pre >= 1.0) return;  // clamped
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out[i] = std::exp((inputs[i] - m) / gamma) / acc;
  }
}

}  // namespace detail

struct SampleGradient {
  double loss = 0;
  std::vector<double> dw;  // dL/dW
};

// Exact reverse accumulation of -log pi(a | v_in) through the policy
// softmax, the per-action hard max (argmax branch), the softor layers and
// the product t-norm bodies.
inline SampleGradient policy_sample_grad(const ValuationVector& v_in, const ClauseWeights& weights,
                                         const InferenceGraph& g, const ReasonerConfig& cfg,
                                         int expert_action_index) {
  ChainTrace trace = forward_chain_trace(v_in, weights, g, cfg);
  std::vector<double> scores = action_scores(trace.final(), g);
  std::vector<double> pi = policy_distribution(scores, cfg);

  SampleGradient out;
  out.dw.assign(g.num_weights, 0.0);
  double p = std::max(pi[static_cast<std::size_t>(expert_action_index)], 1e-300);
  out.loss = -std::log(p);

  // dL/ds_c, routed to the argmax head atom of each action
  std::vector<double> vbar(g.num_atoms, 0.0);
  for (std::size_t a = 0; a < g.actions.size(); ++a) {
    double ds = (pi[a] - (static_cast<int>(a) == expert_action_index ? 1.0 : 0.0)) /
                cfg.policy_temperature;
    int best_head = -1;
    double best_val = -1;
    for (int h : g.heads_by_action[a]) {
      double v = trace.final()[static_cast<std::size_t>(g.heads[static_cast<std::size_t>(h)].atom)];
      if (v > best_val) {
        best_val = v;
        best_head = h;
      }
    }
    if (best_head >= 0) {
      vbar[static_cast<std::size_t>(g.heads[static_cast<std::size_t>(best_head)].atom)] += ds;
    }
  }

  std::vector<double> inputs, alphas;
  for (int t = cfg.t_max; t >= 1; --t) {
    const ValuationVector& prev = trace.steps[static_cast<std::size_t>(t - 1)];
    std::vector<double> vbar_prev = vbar;
    for (const auto& h : g.heads) {
      double gbar = vbar[static_cast<std::size_t>(h.atom)];
      if (gbar == 0.0) continue;
      inputs.clear();
      inputs.push_back(prev[static_cast<std::size_t>(h.atom)]);
      std::vector<double> prods;
      prods.reserve(h.clauses.size());
      for (const auto& gc : h.clauses) {
        double prod = weights.w[static_cast<std::size_t>(gc.weight_slot)];
        for (int b : gc.body) prod *= prev[static_cast<std::size_t>(b)];
        prods.push_back(prod);
        inputs.push_back(prod);
      }
      detail::softor_input_grads(inputs, cfg.gamma, cfg.softor, alphas);
      vbar_prev[static_cast<std::size_t>(h.atom)] = gbar * alphas[0];
      for (std::size_t k = 0; k < h.clauses.size(); ++k) {
        const auto& gc = h.clauses[k];
        double cbar = gbar * alphas[k + 1];
        if (cbar == 0.0) continue;
        double w = weights.w[static_cast<std::size_t>(gc.weight_slot)];
        // d prod / d w = prod of body values
        double body_prod = 1.0;
        for (int b : gc.body) body_prod *= prev[static_cast<std::size_t>(b)];
        out.dw[static_cast<std::size_t>(gc.weight_slot)] += cbar * body_prod;
        for (std::size_t bi = 0; bi < gc.body.size(); ++bi) {
          double excl = w;
          for (std::size_t bj = 0; bj < gc.body.size(); ++bj) {
            if (bj != bi) excl *= prev[static_cast<std::size_t>(gc.body[bj])];
          }
          vbar_prev[static_cast<std::size_t>(gc.body[bi])] += cbar * excl;
        }
      }
    }
    vbar = std::move(vbar_prev);
  }
  return out;
}

// --- weight file ------------------------------------------------------

struct WeightFile {
  std::string rules_hash;
  ReasonerConfig config;
  std::vector<std::pair<std::string, double>> entries;  // (clause text, weight)
};

inline std::string format_weight_file(const RuleBase& rb, const ClauseWeights& weights,
                                      const ReasonerConfig& cfg, const std::string& rules_text) {
  std::ostringstream os;
  os << "# grail-weights v1\n";
  os << "rules_hash " << fnv1a_hex(rules_text) << "\n";
  os << "clauses " << rb.size() << "\n";
  os << "t_max " << cfg.t_max << "\n";
  os << std::setprecision(17) << "gamma " << cfg.gamma << "\n";
  os << "softor " << (cfg.softor == SoftorKind::LogSumExp ? "lse" : "sum_clamp") << "\n";
  for (std::size_t i = 0; i < rb.size(); ++i) {
    os << i << '\t' << std::setprecision(17) << weights.w[i] << '\t'
       << rb.clauses[i].to_string() << "\n";
  }
  return os.str();
}

inline WeightFile parse_weight_file(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  WeightFile wf;
  if (!std::getline(is, line) || line != "# grail-weights v1") {
    throw std::runtime_error("weight file: bad or missing header");
  }
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "rules_hash") {
      ls >> wf.rules_hash;
    } else if (key == "clauses") {
      ls >> n;
    } else if (key == "t_max") {
      ls >> wf.config.t_max;
    } else if (key == "gamma") {
      ls >> wf.config.gamma;
    } else if (key == "softor") {
      std::string s;
      ls >> s;
      wf.config.softor = s == "sum_clamp" ? SoftorKind::SumClamp : SoftorKind::LogSumExp;
    } else {
      // entry line: index, weight, clause text
      std::istringstream es(line);
      std::size_t i;
      double w;
      es >> i >> w;
      std::string rest;
      std::getline(es, rest);
      while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.erase(0, 1);
      wf.entries.emplace_back(rest, w);
    }
  }
  if (wf.entries.size() != n) throw std::runtime_error("weight file: clause count mismatch");
  return wf;
}

inline ClauseWeights weights_from_file(const WeightFile& wf, const std::string& rules_text) {
  if (wf.rules_hash != fnv1a_hex(rules_text)) {
    throw std::runtime_error("weight file does not match rule file (hash mismatch)");
  }
  ClauseWeights cw;
  for (const auto& [text, w] : wf.entries) cw.w.push_back(w);
  return cw;
}

}  // namespace grail
