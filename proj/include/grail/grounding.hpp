#pragma once

// Object-centric states, the ground-atom index, and the mapping from
// states to fuzzy valuation vectors via analytic soft predicates. Also
// hosts the crisp oracle valuation and NLL calibration of the soft
// predicate parameters.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grail/logic.hpp"

namespace grail {

struct ObjectSlot {
  std::string name;
  std::string type;
};

struct ObjectInventory {
  std::string env_name;
  std::vector<ObjectSlot> slots;

  std::size_t max_count() const { return slots.size(); }

  int player_slot() const {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].type == "player") return static_cast<int>(i);
    }
    return -1;
  }

  int count_of_type(const std::string& type) const {
    int n = 0;
    for (const auto& s : slots) n += (s.type == type);
    return n;
  }
};

enum class StateLayout { Asterix, Seaquest };

enum class Orientation : int { Left = 0, Right = 1 };

struct ObjectState {
  bool present = false;
  double x = 0, y = 0;           // raw pixels
  double width = 0, height = 0;  // Seaquest layout only
  Orientation orientation = Orientation::Right;
};

struct LogicState {
  StateLayout layout = StateLayout::Asterix;
  double frame_w = 84, frame_h = 84;
  std::vector<ObjectState> objects;  // aligned with the inventory slots
};

// Per-object feature rows in the documented layouts; type ids follow slot
// order of first appearance in the inventory.
inline std::vector<std::vector<double>> state_features(const LogicState& s,
                                                       const ObjectInventory& inv) {
  std::vector<std::string> type_order;
  auto type_id = [&type_order](const std::string& t) {
    for (std::size_t i = 0; i < type_order.size(); ++i) {
      if (type_order[i] == t) return static_cast<double>(i);
    }
    type_order.push_back(t);
    return static_cast<double>(type_order.size() - 1);
  };
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    double tid = type_id(inv.slots[i].type);
    if (s.layout == StateLayout::Asterix) {
      rows.push_back({o.present ? 1.0 : 0.0, tid, o.x, o.y});
    } else {
      rows.push_back({o.present ? 1.0 : 0.0, o.x, o.y, o.width, o.height,
                      static_cast<double>(o.orientation), tid});
    }
  }
  return rows;
}

// Soft predicate families. Typed Seaquest names (close_by_enemy, ...) map
// onto the same families as the generic Asterix ones.
enum class PredSem {
  Closeby,
  NotCloseby,
  SameRow,  // also same_depth_*
  OnLeft,   // first arg left of second
  OnRight,
  AboveRow,  // also higher_than_*
  BelowRow,  // also deeper_than_*
  AtTop,
  AtBottom,
  OnEven,
  OnOdd,
  FacingLeft,
  FacingRight,
  Visible,
  TypeIs,
  Closest,
  OxygenLow,
  DiversFull,
  AboveWater,
  BelowWater,
};

inline PredSem sem_of_predicate(const std::string& name) {
  static const std::map<std::string, PredSem> table = {
      {"closeby", PredSem::Closeby},
      {"close_by_enemy", PredSem::Closeby},
      {"close_by_missile", PredSem::Closeby},
      {"close_by_diver", PredSem::Closeby},
      {"notcloseby", PredSem::NotCloseby},
      {"not_close_by_enemy", PredSem::NotCloseby},
      {"same_row", PredSem::SameRow},
      {"same_depth_enemy", PredSem::SameRow},
      {"same_depth_missile", PredSem::SameRow},
      {"on_left", PredSem::OnLeft},
      {"left_of_enemy", PredSem::OnLeft},
      {"left_of_diver", PredSem::OnLeft},
      {"on_right", PredSem::OnRight},
      {"right_of_enemy", PredSem::OnRight},
      {"right_of_diver", PredSem::OnRight},
      {"above_row", PredSem::AboveRow},
      {"higher_than_enemy", PredSem::AboveRow},
      {"higher_than_diver", PredSem::AboveRow},
      {"below_row", PredSem::BelowRow},
      {"deeper_than_enemy", PredSem::BelowRow},
      {"deeper_than_diver", PredSem::BelowRow},
      {"at_top", PredSem::AtTop},
      {"at_bottom", PredSem::AtBottom},
      {"on_even", PredSem::OnEven},
      {"on_odd", PredSem::OnOdd},
      {"facing_left", PredSem::FacingLeft},
      {"facing_right", PredSem::FacingRight},
      {"visible", PredSem::Visible},
      {"visible_enemy", PredSem::Visible},
      {"visible_missile", PredSem::Visible},
      {"visible_diver", PredSem::Visible},
      {"type", PredSem::TypeIs},
      {"closest", PredSem::Closest},
      {"oxygen_low", PredSem::OxygenLow},
      {"divers_collected_full", PredSem::DiversFull},
      {"above_water", PredSem::AboveWater},
      {"below_water", PredSem::BelowWater},
  };
  auto it = table.find(name);
  if (it == table.end()) throw std::runtime_error("no semantics for predicate '" + name + "'");
  return it->second;
}

struct SoftPredicateParams {
  double close_threshold = 0.15;  // normalized distance
  double row_tol = 0.04;
  double temperature = 0.02;
  double oxy_threshold = 0.3;
  double y_edge = 0.5;
  double waterline = 0.15;
  int lane_count = 6;  // geometry for on_even/on_odd, not calibratable

  std::vector<double> to_vector() const {
    return {close_threshold, row_tol, temperature, oxy_threshold, y_edge, waterline};
  }
  static SoftPredicateParams from_vector(const std::vector<double>& v,
                                         const SoftPredicateParams& base) {
    SoftPredicateParams p = base;
    p.close_threshold = v[0];
    p.row_tol = v[1];
    p.temperature = v[2];
    p.oxy_threshold = v[3];
    p.y_edge = v[4];
    p.waterline = v[5];
    return p;
  }
  void project() {
    auto clip = [](double& x, double lo, double hi) { x = std::min(hi, std::max(lo, x)); };
    clip(close_threshold, 1e-4, 1.0 - 1e-4);
    clip(row_tol, 1e-4, 1.0 - 1e-4);
    clip(oxy_threshold, 1e-4, 1.0 - 1e-4);
    clip(y_edge, 1e-4, 1.0 - 1e-4);
    clip(waterline, 1e-4, 1.0 - 1e-4);
    temperature = std::max(1e-6, temperature);
  }
};

struct GroundArg {
  int slot = -1;         // >= 0: inventory slot
  std::string constant;  // used when slot < 0

  friend bool operator==(const GroundArg& a, const GroundArg& b) {
    return a.slot == b.slot && a.constant == b.constant;
  }
  friend bool operator<(const GroundArg& a, const GroundArg& b) {
    if (a.slot != b.slot) return a.slot < b.slot;
    return a.constant < b.constant;
  }
};

struct GroundAtom {
  std::string predicate;
  std::vector<GroundArg> args;
  PredSem sem;
  bool is_head = false;

  std::string key() const {
    std::string k = predicate;
    k += '(';
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i > 0) k += ',';
      k += args[i].slot >= 0 ? "#" + std::to_string(args[i].slot) : args[i].constant;
    }
    k += ')';
    return k;
  }
};

using ValuationVector = std::vector<double>;

struct AtomIndex {
  std::vector<GroundAtom> atoms;
  std::map<std::string, int> lookup;
  std::vector<std::vector<int>> entity_refs;  // slots referenced per atom

  std::size_t size() const { return atoms.size(); }

  int find(const std::string& key) const {
    auto it = lookup.find(key);
    return it == lookup.end() ? -1 : it->second;
  }
};

namespace detail {

inline bool sort_matches_slot(const Sort& sort, const std::string& slot_type) {
  return sort == "object" || sort == slot_type;
}

// All injective slot tuples consistent with the argument sorts.
inline void enumerate_slot_tuples(const std::vector<Sort>& sorts, const ObjectInventory& inv,
                                  const std::function<void(const std::vector<int>&)>& emit) {
  std::vector<int> tuple;
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == sorts.size()) {
      emit(tuple);
      return;
    }
    for (std::size_t s = 0; s < inv.slots.size(); ++s) {
      if (!sort_matches_slot(sorts[pos], inv.slots[s].type)) continue;
      if (std::find(tuple.begin(), tuple.end(), static_cast<int>(s)) != tuple.end()) continue;
      tuple.push_back(static_cast<int>(s));
      rec(pos + 1);
      tuple.pop_back();
    }
  };
  rec(0);
}

}  // namespace detail

// Enumerates every type-consistent grounding of the rule base's body
// predicates over the inventory, plus one designated ground head atom per
// action-head predicate (its argument bound to the player slot).
// Ordering is deterministic: predicate name, then argument tuple.
inline AtomIndex build_atom_index(const RuleBase& rb, const ObjectInventory& inv) {
  if (inv.slots.empty()) throw std::runtime_error("empty object inventory");
  int player = inv.player_slot();

  // constants appearing per (predicate, position) in the rule base
  std::map<std::pair<std::string, int>, std::vector<std::string>> consts;
  auto note_consts = [&consts](const ClauseAtom& a) {
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (!a.args[i].is_variable()) {
        auto& v = consts[{a.predicate, static_cast<int>(i)}];
        if (std::find(v.begin(), v.end(), a.args[i].name) == v.end())
          v.push_back(a.args[i].name);
      }
    }
  };

  std::vector<const PredicateSignature*> body_preds;
  std::vector<const PredicateSignature*> head_preds;
  for (const auto& c : rb.clauses) {
    const auto* hsig = rb.signatures.find(c.head.predicate, static_cast<int>(c.head.args.size()));
    if (std::find(head_preds.begin(), head_preds.end(), hsig) == head_preds.end())
      head_preds.push_back(hsig);
    for (const auto& a : c.body) {
      note_consts(a);
      const auto* sig = rb.signatures.find(a.predicate, static_cast<int>(a.args.size()));
      if (std::find(body_preds.begin(), body_preds.end(), sig) == body_preds.end())
        body_preds.push_back(sig);
    }
  }

  std::vector<GroundAtom> atoms;
  for (const auto* sig : body_preds) {
    PredSem sem = sem_of_predicate(sig->name);
    // split args into slot-valued and constant-valued positions
    std::vector<Sort> slot_sorts;
    std::vector<int> slot_positions;
    std::vector<int> const_positions;
    for (int i = 0; i < sig->arity; ++i) {
      if (sig->arg_sorts[static_cast<std::size_t>(i)] == "type_label") {
        const_positions.push_back(i);
      } else {
        slot_sorts.push_back(sig->arg_sorts[static_cast<std::size_t>(i)]);
        slot_positions.push_back(i);
      }
    }
    std::vector<std::vector<std::string>> const_choices;
    for (int pos : const_positions) {
      auto it = consts.find({sig->name, pos});
      const_choices.push_back(it == consts.end() ? std::vector<std::string>{} : it->second);
      std::sort(const_choices.back().begin(), const_choices.back().end());
    }

    detail::enumerate_slot_tuples(slot_sorts, inv, [&](const std::vector<int>& tuple) {
      // cartesian product over constant choices (at most one in practice)
      std::vector<std::size_t> ci(const_choices.size(), 0);
      while (true) {
        GroundAtom ga;
        ga.predicate = sig->name;
        ga.sem = sem;
        ga.args.resize(static_cast<std::size_t>(sig->arity));
        for (std::size_t k = 0; k < slot_positions.size(); ++k)
          ga.args[static_cast<std::size_t>(slot_positions[k])].slot = tuple[k];
        for (std::size_t k = 0; k < const_positions.size(); ++k) {
          if (ci.empty() || const_choices[k].empty()) break;
          ga.args[static_cast<std::size_t>(const_positions[k])].constant = const_choices[k][ci[k]];
        }
        atoms.push_back(std::move(ga));
        // advance cartesian counter
        std::size_t k = 0;
        for (; k < ci.size(); ++k) {
          if (++ci[k] < const_choices[k].size()) break;
          ci[k] = 0;
        }
        if (ci.empty() || k == ci.size()) break;
      }
    });
  }

  for (const auto* sig : head_preds) {
    GroundAtom ga;
    ga.predicate = sig->name;
    ga.sem = PredSem::Visible;  // unused for heads
    ga.is_head = true;
    ga.args.resize(static_cast<std::size_t>(sig->arity));
    for (auto& a : ga.args) a.slot = player >= 0 ? player : 0;
    atoms.push_back(std::move(ga));
  }

  std::sort(atoms.begin(), atoms.end(), [](const GroundAtom& a, const GroundAtom& b) {
    if (a.predicate != b.predicate) return a.predicate < b.predicate;
    return a.args < b.args;
  });
  atoms.erase(std::unique(atoms.begin(), atoms.end(),
                          [](const GroundAtom& a, const GroundAtom& b) {
                            return a.predicate == b.predicate && a.args == b.args;
                          }),
              atoms.end());

  AtomIndex idx;
  idx.atoms = std::move(atoms);
  for (std::size_t i = 0; i < idx.atoms.size(); ++i) {
    idx.lookup[idx.atoms[i].key()] = static_cast<int>(i);
    std::vector<int> refs;
    if (!idx.atoms[i].is_head) {
      for (const auto& a : idx.atoms[i].args) {
        if (a.slot >= 0) refs.push_back(a.slot);
      }
    }
    idx.entity_refs.push_back(std::move(refs));
  }
  return idx;
}

namespace detail {

struct AtomEval {
  const LogicState& s;
  const ObjectInventory& inv;
  const SoftPredicateParams& p;
  bool crisp;

  // Crisp thresholding is >= 0 so exact-boundary states (two objects in
  // the same column for on_left/on_right, equidistant closest-ties) break
  // toward firing; otherwise no rule covers them and the expert would
  // emit noop labels that contradict the fuzzy grounding.
  double sig(double z) const { return crisp ? (z >= 0 ? 1.0 : 0.0) : sigmoid(z); }

  double xn(int slot) const { return s.objects[static_cast<std::size_t>(slot)].x / s.frame_w; }
  double yn(int slot) const { return s.objects[static_cast<std::size_t>(slot)].y / s.frame_h; }
  bool present(int slot) const { return s.objects[static_cast<std::size_t>(slot)].present; }

  double dist(int a, int b) const { return std::hypot(xn(a) - xn(b), yn(a) - yn(b)); }

  double closest_second_distance(int a) const {
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < s.objects.size(); ++o) {
      int oi = static_cast<int>(o);
      if (oi == a || !present(oi)) continue;
      double d = dist(a, oi);
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    return second;
  }

  double eval(const GroundAtom& atom) {
    const double tau = p.temperature;
    auto slot = [&atom](std::size_t i) { return atom.args[i].slot; };
    double v = 0.0;
    switch (atom.sem) {
      case PredSem::Closeby:
        v = sig((p.close_threshold - dist(slot(0), slot(1))) / tau);
        break;
      case PredSem::NotCloseby:
        v = 1.0 - sig((p.close_threshold - dist(slot(0), slot(1))) / tau);
        break;
      case PredSem::SameRow:
        v = sig((p.row_tol - std::abs(yn(slot(0)) - yn(slot(1)))) / tau);
        break;
      case PredSem::OnLeft:
        v = sig((xn(slot(1)) - xn(slot(0))) / tau);
        break;
      case PredSem::OnRight:
        v = sig((xn(slot(0)) - xn(slot(1))) / tau);
        break;
      case PredSem::AboveRow:
        v = sig(((yn(slot(1)) - yn(slot(0))) - p.row_tol) / tau);
        break;
      case PredSem::BelowRow:
        v = sig(((yn(slot(0)) - yn(slot(1))) - p.row_tol) / tau);
        break;
      case PredSem::AtTop:
        v = sig((p.y_edge - yn(slot(0))) / tau);
        break;
      case PredSem::AtBottom:
        v = sig((yn(slot(0)) - p.y_edge) / tau);
        break;
      case PredSem::OnEven: {
        int row = static_cast<int>(yn(slot(0)) * p.lane_count);
        v = (row % 2 == 0) ? 1.0 : 0.0;
        break;
      }
      case PredSem::OnOdd: {
        int row = static_cast<int>(yn(slot(0)) * p.lane_count);
        v = (row % 2 == 1) ? 1.0 : 0.0;
        break;
      }
      case PredSem::FacingLeft:
        v = s.objects[static_cast<std::size_t>(slot(0))].orientation == Orientation::Left ? 1.0 : 0.0;
        break;
      case PredSem::FacingRight:
        v = s.objects[static_cast<std::size_t>(slot(0))].orientation == Orientation::Right ? 1.0 : 0.0;
        break;
      case PredSem::Visible:
        v = 1.0;  // presence factor applied below
        break;
      case PredSem::TypeIs:
        v = inv.slots[static_cast<std::size_t>(slot(0))].type == atom.args[1].constant ? 1.0 : 0.0;
        break;
      case PredSem::Closest: {
        double d2 = closest_second_distance(slot(0));
        if (std::isinf(d2)) {
          v = 1.0;  // at most one candidate: trivially closest
        } else {
          v = sig((d2 - dist(slot(0), slot(1))) / tau);
        }
        break;
      }
      case PredSem::OxygenLow: {
        double oxy = s.objects[static_cast<std::size_t>(slot(0))].width / s.frame_w;
        v = sig((p.oxy_threshold - oxy) / tau);
        break;
      }
      case PredSem::DiversFull: {
        int capacity = 0, carried = 0;
        for (std::size_t o = 0; o < inv.slots.size(); ++o) {
          if (inv.slots[o].type == "collected_diver") {
            ++capacity;
            carried += s.objects[o].present ? 1 : 0;
          }
        }
        v = (capacity > 0 && carried >= capacity) ? 1.0 : 0.0;
        break;
      }
      case PredSem::AboveWater:
        v = sig((p.waterline - yn(slot(0))) / tau);
        break;
      case PredSem::BelowWater:
        v = sig((yn(slot(0)) - p.waterline) / tau);
        break;
    }
    for (const auto& a : atom.args) {
      if (a.slot >= 0 && !present(a.slot)) v = 0.0;
    }
    return clamp01(v);
  }
};

}  // namespace detail

inline void check_layout(const LogicState& s, const ObjectInventory& inv) {
  if (s.objects.size() != inv.slots.size()) {
    throw std::runtime_error("state has " + std::to_string(s.objects.size()) +
                             " objects but inventory has " + std::to_string(inv.slots.size()) +
                             " slots");
  }
}

inline ValuationVector ground_valuation(const LogicState& s, const SoftPredicateParams& params,
                                        const AtomIndex& idx, const ObjectInventory& inv) {
  check_layout(s, inv);
  detail::AtomEval ev{s, inv, params, /*crisp=*/false};
  ValuationVector v(idx.size(), 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (!idx.atoms[i].is_head) v[i] = ev.eval(idx.atoms[i]);
  }
  return v;
}

// Crisp 0/1 valuation: every soft predicate thresholded at its boundary.
inline ValuationVector oracle_valuation(const LogicState& s, const AtomIndex& idx,
                                        const ObjectInventory& inv,
                                        const SoftPredicateParams& params = {}) {
  check_layout(s, inv);
  detail::AtomEval ev{s, inv, params, /*crisp=*/true};
  ValuationVector v(idx.size(), 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (!idx.atoms[i].is_head) v[i] = ev.eval(idx.atoms[i]);
  }
  return v;
}

struct CalibrationSample {
  LogicState state;
  ValuationVector target;  // binary oracle valuation y_t
};

struct CalibrationOptions {
  int steps = 200;
  double learning_rate = 0.05;
  double fd_step = 1e-4;
};

inline constexpr double kLogClamp = 1e-7;

inline double calibration_nll(const std::vector<CalibrationSample>& data,
                              const SoftPredicateParams& params, const AtomIndex& idx,
                              const ObjectInventory& inv) {
  double total = 0.0;
  for (const auto& sample : data) {
    ValuationVector v = ground_valuation(sample.state, params, idx, inv);
    double loss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double vi = std::min(1.0 - kLogClamp, std::max(kLogClamp, v[i]));
      double yi = sample.target[i];
      loss -= yi * std::log(vi) + (1.0 - yi) * std::log(1.0 - vi);
    }
    total += loss / static_cast<double>(v.size());
  }
  return total / static_cast<double>(data.size());
}

// Gradient descent on the Bernoulli NLL over the soft-predicate parameter
// vector; gradients by central differences (the parameter space is tiny).
inline SoftPredicateParams calibrate_predicates(const std::vector<CalibrationSample>& data,
                                                const SoftPredicateParams& initial,
                                                const AtomIndex& idx, const ObjectInventory& inv,
                                                const CalibrationOptions& opts = {}) {
  if (data.empty()) throw std::runtime_error("calibration dataset is empty");
  SoftPredicateParams best = initial;
  best.project();
  double best_loss = calibration_nll(data, best, idx, inv);
  SoftPredicateParams cur = best;
  double cur_loss = best_loss;

  for (int step = 0; step < opts.steps; ++step) {
    std::vector<double> theta = cur.to_vector();
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      std::vector<double> up = theta, dn = theta;
      up[k] += opts.fd_step;
      dn[k] -= opts.fd_step;
      SoftPredicateParams pu = SoftPredicateParams::from_vector(up, cur);
      SoftPredicateParams pd = SoftPredicateParams::from_vector(dn, cur);
      grad[k] = (calibration_nll(data, pu, idx, inv) - calibration_nll(data, pd, idx, inv)) /
                (2.0 * opts.fd_step);
    }
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= opts.learning_rate * grad[k];
    cur = SoftPredicateParams::from_vector(theta, cur);
    cur.project();
    cur_loss = calibration_nll(data, cur, idx, inv);
    if (!std::isfinite(cur_loss)) {
      throw std::runtime_error("calibration diverged at step " + std::to_string(step));
    }
    if (cur_loss < best_loss) {
      best_loss = cur_loss;
      best = cur;
    }
  }
  return best;
}

}  // namespace grail
