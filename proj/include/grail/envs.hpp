#pragma once

// Deterministic object-centric mini-games (Asterix-mini, Seaquest-mini)
// on a 6x6 cell grid rendered into 84x84 pixel coordinates, with a
// scripted rule-based expert, synthetic gaze, dataset generation and
// greedy-rollout evaluation.
//
// All in-episode randomness (spawn cells, respawns, distractor placement)
// is hash-derived from (episode seed, step, salt), so a trajectory is a
// pure function of (config, seed, action sequence).

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grail/domains.hpp"
#include "grail/gaze.hpp"
#include "grail/reasoner.hpp"

namespace grail {

struct EnvConfig {
  std::string env_name = "asterix-mini";
  int frame_w = 84, frame_h = 84;
  int cols = 6, rows = 6;
  int objects_per_type = 1;
  int distractors = 0;  // extra inert entities for the spurious ablation
  int episode_length = 200;
  std::uint64_t seed = 0;
  double p_noise = 0.1;         // probability of a stray gaze fixation
  double expert_epsilon = 0.0;  // expert action noise (off by default)
  int bonus_period = 8;         // Asterix: bonus relocates every N steps
  double oxygen_decay = 1.0 / 60.0;  // Seaquest: per underwater step
  SoftPredicateParams predicates;    // shared by expert and learner
  ObjectInventory inventory_override;  // set when a dataset is read from disk

  double cell_w() const { return static_cast<double>(frame_w) / cols; }
  double cell_h() const { return static_cast<double>(frame_h) / rows; }

  StateLayout layout() const {
    return env_name == "seaquest-mini" ? StateLayout::Seaquest : StateLayout::Asterix;
  }

  ObjectInventory inventory() const {
    if (!inventory_override.slots.empty()) return inventory_override;
    if (env_name == "asterix-mini") return asterix_inventory(objects_per_type, distractors);
    if (env_name == "seaquest-mini")
      return seaquest_inventory(objects_per_type, std::max(1, objects_per_type),
                                objects_per_type);
    if (env_name == "freeway") return freeway_inventory();
    throw std::runtime_error("unknown environment '" + env_name + "'");
  }
};

// Sharp predicate preset: distances several cells apart resolve to crisp
// 0/1 values, so the scripted expert (crisp) and the learner's fuzzy
// grounding agree on every reachable grid state.
inline SoftPredicateParams sharp_grid_predicates() {
  SoftPredicateParams p;
  p.close_threshold = 0.45;  // within two grid cells
  p.row_tol = 0.04;
  p.temperature = 0.005;
  p.oxy_threshold = 0.3;
  p.y_edge = 0.5;
  p.waterline = 0.15;
  p.lane_count = 6;
  return p;
}

inline EnvConfig asterix_env_config(int objects_per_type = 1, int distractors = 0) {
  EnvConfig c;
  c.env_name = "asterix-mini";
  c.objects_per_type = objects_per_type;
  c.distractors = distractors;
  c.episode_length = 30;
  c.bonus_period = 10;
  c.predicates = sharp_grid_predicates();
  return c;
}

inline EnvConfig seaquest_env_config(int objects_per_type = 1) {
  EnvConfig c;
  c.env_name = "seaquest-mini";
  c.objects_per_type = objects_per_type;
  c.predicates = sharp_grid_predicates();
  return c;
}

inline EnvConfig freeway_env_config() {
  EnvConfig c;
  c.env_name = "freeway";
  c.predicates = sharp_grid_predicates();
  return c;
}

inline EnvConfig env_config_for(const std::string& name, int objects_per_type = 1,
                                int distractors = 0) {
  if (name == "asterix-mini") return asterix_env_config(objects_per_type, distractors);
  if (name == "seaquest-mini") return seaquest_env_config(objects_per_type);
  if (name == "freeway") return freeway_env_config();
  throw std::runtime_error("unknown environment '" + name + "'");
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return mix64(mix64(mix64(a) ^ b) ^ c);
}

}  // namespace detail

struct StepOutcome {
  double score_delta = 0;
  bool terminal = false;
};

struct EpisodeSummary {
  int episode_id = 0;
  double score = 0;
  int length = 0;
  std::string terminal_reason;  // "collision" | "oxygen" | "length_cap"
};

// One playable mini-game instance. The public state is the object-centric
// LogicState aligned with the inventory slots.
class MiniGame {
 public:
  EnvConfig cfg;
  ObjectInventory inv;
  LogicState state;
  int t = 0;
  double score = 0;
  bool terminal = false;
  std::string terminal_reason;

  explicit MiniGame(const EnvConfig& c) : cfg(c), inv(c.inventory()) { reset(c.seed); }

  void reset(std::uint64_t seed) {
    if (cfg.env_name != "asterix-mini" && cfg.env_name != "seaquest-mini") {
      throw std::runtime_error("environment '" + cfg.env_name +
                               "' is a config preset without playable dynamics");
    }
    seed_ = seed;
    t = 0;
    score = 0;
    oxygen_ = 1.0;
    terminal = false;
    terminal_reason.clear();
    state.layout = cfg.layout();
    state.frame_w = cfg.frame_w;
    state.frame_h = cfg.frame_h;
    state.objects.assign(inv.slots.size(), ObjectState{});
    Rng rng(seed);
    if (cfg.env_name == "asterix-mini") {
      reset_asterix(rng);
    } else {
      reset_seaquest(rng);
    }
  }

  StepOutcome step(Action a) {
    if (terminal) throw std::runtime_error("step on a terminal episode");
    StepOutcome out;
    if (cfg.env_name == "asterix-mini") {
      out.score_delta = step_asterix(a);
    } else {
      out.score_delta = step_seaquest(a);
    }
    ++t;
    score += out.score_delta;
    if (!terminal && t >= cfg.episode_length) {
      terminal = true;
      terminal_reason = "length_cap";
    }
    out.terminal = terminal;
    return out;
  }

  StepOutcome step(int action_id) {
    if (action_id < 0 || action_id >= kNumActions) {
      throw std::runtime_error("illegal action id " + std::to_string(action_id));
    }
    return step(static_cast<Action>(action_id));
  }

  EpisodeSummary summary(int episode_id = 0) const {
    return {episode_id, score, t, terminal_reason};
  }

  // grid helpers
  int col_of(int slot) const {
    return static_cast<int>(state.objects[static_cast<std::size_t>(slot)].x / cfg.cell_w());
  }
  int row_of(int slot) const {
    return static_cast<int>(state.objects[static_cast<std::size_t>(slot)].y / cfg.cell_h());
  }
  void place(int slot, int col, int row) {
    auto& o = state.objects[static_cast<std::size_t>(slot)];
    o.x = (col + 0.5) * cfg.cell_w();
    o.y = (row + 0.5) * cfg.cell_h();
  }

  std::vector<int> slots_of_type(const std::string& type) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < inv.slots.size(); ++i) {
      if (inv.slots[i].type == type) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  // Deterministic cell draw avoiding one cell, used for respawns.
  std::pair<int, int> hash_cell(std::uint64_t salt, int avoid_col, int avoid_row,
                                int row_lo = 0) const {
    std::uint64_t h = detail::mix64(seed_, static_cast<std::uint64_t>(t), salt);
    while (true) {
      int c = static_cast<int>(h % static_cast<std::uint64_t>(cfg.cols));
      int r = row_lo + static_cast<int>((h / static_cast<std::uint64_t>(cfg.cols)) %
                                        static_cast<std::uint64_t>(cfg.rows - row_lo));
      if (c != avoid_col || r != avoid_row) return {c, r};
      h = detail::mix64(h);
    }
  }

  double oxygen() const { return oxygen_; }

 private:
  std::uint64_t seed_ = 0;
  double oxygen_ = 1.0;

  void reset_asterix(Rng& rng) {
    int player = inv.player_slot();
    state.objects[static_cast<std::size_t>(player)].present = true;
    place(player, 2, 2);

    // Enemies spawn on distinct odd rows (which all sweep rightward, the
    // direction the dodge rules trigger on), away from the player's row.
    // Even rows stay enemy-free, so a vertical dodge always lands on a
    // safe row and difficulty stays comparable across object counts.
    std::vector<int> row_pool;
    for (int r = 1; r < cfg.rows; r += 2) {
      if (r != row_of(player)) row_pool.push_back(r);
    }
    rng.shuffle(row_pool);
    std::vector<int> enemies = slots_of_type("enemy");
    for (std::size_t i = 0; i < enemies.size(); ++i) {
      auto& o = state.objects[static_cast<std::size_t>(enemies[i])];
      o.present = true;
      // spawn at least two columns from the player so the opening moves
      // cannot run straight into a patrol
      int c;
      do {
        c = rng.next_int(0, cfg.cols);
      } while (std::abs(c - col_of(player)) < 2);
      place(enemies[i], c, row_pool[i % row_pool.size()]);
    }
    // Bonuses live on even rows (the enemy-free lanes), never stacked on
    // the player or each other, so a pickup never requires parking inside
    // a patrol lane. The opening wave spawns on the player's own row, so
    // an episode always starts with a safe horizontal chase.
    std::vector<int> bonuses = slots_of_type("bonus");
    for (std::size_t i = 0; i < bonuses.size(); ++i) {
      state.objects[static_cast<std::size_t>(bonuses[i])].present = true;
      while (true) {
        int c = rng.next_int(0, cfg.cols);
        int r = row_of(player);
        if (c == col_of(player) && r == row_of(player)) continue;
        bool clash = false;
        for (std::size_t j = 0; j < i; ++j) {
          if (col_of(bonuses[j]) == c && row_of(bonuses[j]) == r) clash = true;
        }
        if (clash) continue;
        place(bonuses[i], c, r);
        break;
      }
    }
    relocate_distractors();
  }

  // Row direction convention (0-indexed, matching the on_even/on_odd
  // predicates): even rows sweep left, odd rows sweep right, wrapping at
  // the frame edge.
  int enemy_dir(int row) const { return row % 2 == 1 ? 1 : -1; }

  double step_asterix(Action a) {
    double delta = 0;
    int player = inv.player_slot();
    int pc = col_of(player), pr = row_of(player);
    switch (a) {
      case Action::Up: pr = std::max(0, pr - 1); break;
      case Action::Down: pr = std::min(cfg.rows - 1, pr + 1); break;
      case Action::Left: pc = std::max(0, pc - 1); break;
      case Action::Right: pc = std::min(cfg.cols - 1, pc + 1); break;
      case Action::Noop:
      case Action::Fire: break;
    }
    place(player, pc, pr);

    auto collide = [this, player](int slot) {
      return state.objects[static_cast<std::size_t>(slot)].present &&
             col_of(slot) == col_of(player) && row_of(slot) == row_of(player);
    };

    for (int b : slots_of_type("bonus")) {
      if (collide(b)) {
        delta += 50;
        respawn_bonus(b, 0x100u + static_cast<std::uint64_t>(b));
      }
    }
    // Moves resolve simultaneously: a collision means the player and an
    // enemy occupy the same cell after both have advanced, so stepping
    // through an enemy's vacated cell is safe.
    for (int e : slots_of_type("enemy")) {
      int row = row_of(e);
      int col = (col_of(e) + enemy_dir(row) + cfg.cols) % cfg.cols;
      place(e, col, row);
      if (collide(e)) {
        terminal = true;
        terminal_reason = "collision";
        return delta;
      }
    }
    if (cfg.bonus_period > 0 && (t + 1) % cfg.bonus_period == 0) {
      for (int b : slots_of_type("bonus")) {
        respawn_bonus(b, 0x200u + static_cast<std::uint64_t>(b));
      }
    }
    relocate_distractors();
    return delta;
  }

  // Bonuses respawn on even rows only, on a hash-probed cell that is free
  // of the player and the other bonuses. Half the respawns land on the
  // player's own lane pair, keeping most chases horizontal.
  void respawn_bonus(int b, std::uint64_t salt) {
    int player = inv.player_slot();
    auto half = static_cast<std::uint64_t>((cfg.rows + 1) / 2);
    for (std::uint64_t k = 0;; ++k) {
      std::uint64_t h =
          detail::mix64(seed_, static_cast<std::uint64_t>(t), salt + (k << 32));
      int c = static_cast<int>(h % static_cast<std::uint64_t>(cfg.cols));
      int r = ((h >> 8) & 1) ? (row_of(player) & ~1)
                             : 2 * static_cast<int>((h >> 16) % half);
      if (c == col_of(player) && r == row_of(player)) continue;
      bool clash = false;
      for (int ob : slots_of_type("bonus")) {
        if (ob != b && col_of(ob) == c && row_of(ob) == r) clash = true;
      }
      if (clash) continue;
      place(b, c, r);
      return;
    }
  }

  // Distractors are inert decoration: present, repositioned every step to
  // a hash-random cell. Dataset generation may override the placement.
  void relocate_distractors() {
    int player = inv.player_slot();
    for (int d : slots_of_type("distractor")) {
      auto& o = state.objects[static_cast<std::size_t>(d)];
      o.present = true;
      auto [c, r] = hash_cell(0x300u + static_cast<std::uint64_t>(d), col_of(player),
                              row_of(player));
      place(d, c, r);
    }
  }

  void set_box(int slot, double w, double h) {
    state.objects[static_cast<std::size_t>(slot)].width = w;
    state.objects[static_cast<std::size_t>(slot)].height = h;
  }

  void sync_oxygen_bar() {
    for (int b : slots_of_type("oxygen_bar")) {
      auto& o = state.objects[static_cast<std::size_t>(b)];
      o.present = true;
      o.x = cfg.frame_w / 2.0;
      o.y = 3.0;
      o.width = oxygen_ * cfg.frame_w;
      o.height = 4.0;
    }
  }

  void reset_seaquest(Rng& rng) {
    int player = inv.player_slot();
    auto& p = state.objects[static_cast<std::size_t>(player)];
    p.present = true;
    p.orientation = Orientation::Right;
    place(player, 2, 2);
    set_box(player, 8, 7);
    sync_oxygen_bar();
    for (int e : slots_of_type("enemy")) {
      auto& o = state.objects[static_cast<std::size_t>(e)];
      o.present = true;
      o.orientation = rng.next_int(0, 2) == 0 ? Orientation::Left : Orientation::Right;
      place(e, rng.next_int(0, cfg.cols), rng.next_int(1, cfg.rows));
      set_box(e, 8, 5);
    }
    for (int d : slots_of_type("diver")) {
      auto& o = state.objects[static_cast<std::size_t>(d)];
      o.present = true;
      place(d, rng.next_int(0, cfg.cols), rng.next_int(1, cfg.rows));
      set_box(d, 6, 7);
    }
    // collected-diver HUD slots start empty; missiles start unfired
    for (int m : slots_of_type("missile")) set_box(m, 6, 2);
    int hud = 0;
    for (int cslot : slots_of_type("collected_diver")) {
      auto& o = state.objects[static_cast<std::size_t>(cslot)];
      o.x = 4.0 + 6.0 * hud++;
      o.y = cfg.frame_h - 3.0;
      o.width = 5.0;
      o.height = 5.0;
    }
  }

  double step_seaquest(Action a) {
    double delta = 0;
    int player = inv.player_slot();
    auto& p = state.objects[static_cast<std::size_t>(player)];
    int pc = col_of(player), pr = row_of(player);
    switch (a) {
      case Action::Up: pr = std::max(0, pr - 1); break;
      case Action::Down: pr = std::min(cfg.rows - 1, pr + 1); break;
      case Action::Left:
        pc = std::max(0, pc - 1);
        p.orientation = Orientation::Left;
        break;
      case Action::Right:
        pc = std::min(cfg.cols - 1, pc + 1);
        p.orientation = Orientation::Right;
        break;
      case Action::Fire: {
        for (int m : slots_of_type("missile")) {
          auto& o = state.objects[static_cast<std::size_t>(m)];
          if (o.present) continue;
          int dir = p.orientation == Orientation::Right ? 1 : -1;
          int mc = pc + dir;
          if (mc < 0 || mc >= cfg.cols) break;
          o.present = true;
          o.orientation = p.orientation;
          place(m, mc, pr);
          break;
        }
        break;
      }
      case Action::Noop: break;
    }
    place(player, pc, pr);

    auto same_cell = [this](int a_slot, int b_slot) {
      return col_of(a_slot) == col_of(b_slot) && row_of(a_slot) == row_of(b_slot);
    };

    // surface: refill oxygen and deliver collected divers
    if (pr == 0) {
      oxygen_ = 1.0;
      std::vector<int> carried;
      for (int cslot : slots_of_type("collected_diver")) {
        if (state.objects[static_cast<std::size_t>(cslot)].present) carried.push_back(cslot);
      }
      if (!carried.empty()) {
        delta += 50.0 * static_cast<double>(carried.size());
        for (int cslot : carried) state.objects[static_cast<std::size_t>(cslot)].present = false;
        for (int d : slots_of_type("diver")) {
          auto& o = state.objects[static_cast<std::size_t>(d)];
          if (o.present) continue;
          auto [c, r] = hash_cell(0x400u + static_cast<std::uint64_t>(d), pc, pr, 1);
          o.present = true;
          place(d, c, r);
        }
      }
    } else {
      oxygen_ = std::max(0.0, oxygen_ - cfg.oxygen_decay);
      if (oxygen_ <= 0.0) {
        terminal = true;
        terminal_reason = "oxygen";
        sync_oxygen_bar();
        return delta;
      }
    }
    sync_oxygen_bar();

    // collect divers
    for (int d : slots_of_type("diver")) {
      auto& o = state.objects[static_cast<std::size_t>(d)];
      if (!o.present || !same_cell(d, player)) continue;
      for (int cslot : slots_of_type("collected_diver")) {
        auto& h = state.objects[static_cast<std::size_t>(cslot)];
        if (h.present) continue;
        h.present = true;
        o.present = false;
        break;
      }
    }

    // missiles fly two cells per step
    for (int m : slots_of_type("missile")) {
      auto& o = state.objects[static_cast<std::size_t>(m)];
      if (!o.present) continue;
      int dir = o.orientation == Orientation::Right ? 1 : -1;
      for (int hop = 0; hop < 2 && o.present; ++hop) {
        int mc = col_of(m) + dir;
        if (mc < 0 || mc >= cfg.cols) {
          o.present = false;
          break;
        }
        place(m, mc, row_of(m));
        for (int e : slots_of_type("enemy")) {
          auto& en = state.objects[static_cast<std::size_t>(e)];
          if (!en.present || !same_cell(e, m)) continue;
          delta += 20;
          o.present = false;
          auto [c, r] = hash_cell(0x500u + static_cast<std::uint64_t>(e), pc, pr, 1);
          en.present = true;
          en.orientation =
              detail::mix64(seed_, static_cast<std::uint64_t>(t), 0x600u + static_cast<std::uint64_t>(e)) % 2 == 0
                  ? Orientation::Left
                  : Orientation::Right;
          place(e, c, r);
          break;
        }
      }
    }

    // enemies advance toward their orientation, wrapping at the edges
    for (int e : slots_of_type("enemy")) {
      auto& o = state.objects[static_cast<std::size_t>(e)];
      if (!o.present) continue;
      int dir = o.orientation == Orientation::Right ? 1 : -1;
      place(e, (col_of(e) + dir + cfg.cols) % cfg.cols, row_of(e));
      if (same_cell(e, player)) {
        terminal = true;
        terminal_reason = "collision";
        return delta;
      }
    }
    return delta;
  }
};

// --- scripted expert --------------------------------------------------

struct ExpertDecision {
  Action action = Action::Noop;
  int clause_id = -1;           // index into the rule base, -1 when no rule fired
  std::vector<int> entities;    // inventory slots bound by the fired clause
};

// Crisp evaluator of a rule base with a documented arbitration order:
// safety rules (dodge/evade) > resource rules (oxygen, diver returns) >
// reward rules > noop fallback rules; file order within a class.
class ScriptedExpert {
 public:
  ScriptedExpert(const RuleBase& rb, const ObjectInventory& inventory,
                 const SoftPredicateParams& params)
      : rb_(&rb), inv_(inventory), params_(params) {
    if (rb.clauses.empty()) return;
    idx_ = build_atom_index(rb, inv_);
    InferenceGraph graph = compile(rb, idx_, inv_);
    for (const auto& h : graph.heads) {
      for (const auto& gc : h.clauses) {
        ordered_.push_back({priority_rank(rb.clauses[static_cast<std::size_t>(gc.clause_id)]
                                              .head.predicate),
                            gc.clause_id, h.action, gc});
      }
    }
    std::stable_sort(ordered_.begin(), ordered_.end(), [](const Entry& a, const Entry& b) {
      if (a.rank != b.rank) return a.rank < b.rank;
      return a.clause_id < b.clause_id;
    });
  }

  static int priority_rank(const std::string& head) {
    if (head.find("dodge") != std::string::npos || head.find("evade") != std::string::npos)
      return 0;
    if (head.find("air") != std::string::npos || head.find("divers") != std::string::npos)
      return 1;
    if (head.rfind("noop", 0) == 0) return 3;
    return 2;
  }

  ExpertDecision decide(const LogicState& s) const {
    ExpertDecision d;
    if (ordered_.empty()) return d;
    ValuationVector v = oracle_valuation(s, idx_, inv_, params_);
    for (const auto& e : ordered_) {
      bool fires = true;
      for (int b : e.gc.body) fires = fires && v[static_cast<std::size_t>(b)] >= 0.5;
      if (!fires) continue;
      d.action = e.action;
      d.clause_id = e.clause_id;
      for (int slot : e.gc.substitution) {
        if (std::find(d.entities.begin(), d.entities.end(), slot) == d.entities.end())
          d.entities.push_back(slot);
      }
      return d;
    }
    return d;
  }

  const AtomIndex& atom_index() const { return idx_; }
  const ObjectInventory& inventory() const { return inv_; }

 private:
  struct Entry {
    int rank;
    int clause_id;
    Action action;
    GroundClause gc;
  };
  const RuleBase* rb_;
  ObjectInventory inv_;
  SoftPredicateParams params_;
  AtomIndex idx_;
  std::vector<Entry> ordered_;
};

// Fixations at the centers of the entities the fired clause referenced;
// the player when no rule fired; plus, with probability p_noise, one
// stray fixation on another present entity.
inline FixationList synth_gaze(const LogicState& s, const std::vector<int>& entities,
                               const ObjectInventory& inv, double p_noise, Rng& rng) {
  FixationList fx;
  std::vector<int> fixed;
  for (int slot : entities) {
    const auto& o = s.objects[static_cast<std::size_t>(slot)];
    if (!o.present) continue;
    fx.push_back({o.x, o.y, 1.0});
    fixed.push_back(slot);
  }
  if (fx.empty()) {
    int player = inv.player_slot();
    if (player >= 0 && s.objects[static_cast<std::size_t>(player)].present) {
      fx.push_back({s.objects[static_cast<std::size_t>(player)].x,
                    s.objects[static_cast<std::size_t>(player)].y, 1.0});
      fixed.push_back(player);
    }
  }
  if (p_noise > 0 && rng.next_double() < p_noise) {
    std::vector<int> others;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      int slot = static_cast<int>(i);
      if (!s.objects[i].present) continue;
      if (std::find(fixed.begin(), fixed.end(), slot) != fixed.end()) continue;
      others.push_back(slot);
    }
    if (!others.empty()) {
      int slot = others[static_cast<std::size_t>(rng.next_below(others.size()))];
      fx.push_back({s.objects[static_cast<std::size_t>(slot)].x,
                    s.objects[static_cast<std::size_t>(slot)].y, 1.0});
    }
  }
  return fx;
}

// --- dataset generation -----------------------------------------------

struct StepRecord {
  int episode_id = 0;
  int t = 0;
  LogicState state;
  Action action = Action::Noop;
  FixationList fixations;
  int fired_rule = -1;
  double score_delta = 0;
};

struct DatasetStats {
  std::size_t samples = 0;
  std::size_t trajectories = 0;
  std::size_t max_object_count = 0;
  double mean_score = 0;
  double mean_length = 0;
};

struct Dataset {
  EnvConfig cfg;
  std::vector<StepRecord> records;
  std::vector<EpisodeSummary> episodes;
  DatasetStats stats;
};

// How the distractor entity is placed relative to the expert action.
enum class SpuriousMode {
  None,        // leave the environment's own (random) placement
  Correlated,  // adjacent cell in the direction of the expert action
  Randomized,  // present, but at a random cell (evaluation episodes)
};

namespace detail {

inline void place_correlated_distractor(MiniGame& game, Action a) {
  std::vector<int> ds = game.slots_of_type("distractor");
  if (ds.empty()) return;
  int player = game.inv.player_slot();
  int pc = game.col_of(player), pr = game.row_of(player);
  int c = pc, r = pr;
  switch (a) {
    case Action::Up: r = pr - 1; break;
    case Action::Down: r = pr + 1; break;
    case Action::Left: c = pc - 1; break;
    case Action::Right: c = pc + 1; break;
    case Action::Noop:
    case Action::Fire:
      for (int d : ds) game.state.objects[static_cast<std::size_t>(d)].present = false;
      return;
  }
  c = std::min(game.cfg.cols - 1, std::max(0, c));
  r = std::min(game.cfg.rows - 1, std::max(0, r));
  auto& o = game.state.objects[static_cast<std::size_t>(ds[0])];
  o.present = !(c == pc && r == pr);
  game.place(ds[0], c, r);
  for (std::size_t i = 1; i < ds.size(); ++i)
    game.state.objects[static_cast<std::size_t>(ds[i])].present = false;
}

}  // namespace detail

inline Dataset generate_dataset(const EnvConfig& cfg, int n_episodes, const RuleBase& expert_rb,
                                SpuriousMode spurious = SpuriousMode::None) {
  Dataset ds;
  ds.cfg = cfg;
  MiniGame game(cfg);
  ScriptedExpert expert(expert_rb, game.inv, cfg.predicates);
  double total_score = 0, total_length = 0;
  for (int e = 0; e < n_episodes; ++e) {
    std::uint64_t ep_seed = detail::mix64(cfg.seed, static_cast<std::uint64_t>(e), 0xE0u);
    game.reset(ep_seed);
    Rng gaze_rng(detail::mix64(cfg.seed, static_cast<std::uint64_t>(e), 0xE1u));
    Rng noise_rng(detail::mix64(cfg.seed, static_cast<std::uint64_t>(e), 0xE2u));
    while (!game.terminal) {
      ExpertDecision d = expert.decide(game.state);
      if (cfg.expert_epsilon > 0 && noise_rng.next_double() < cfg.expert_epsilon) {
        d.action = static_cast<Action>(noise_rng.next_int(0, kNumActions));
        d.clause_id = -1;
        d.entities.clear();
      }
      if (spurious == SpuriousMode::Correlated) {
        detail::place_correlated_distractor(game, d.action);
      }
      StepRecord rec;
      rec.episode_id = e;
      rec.t = game.t;
      rec.state = game.state;
      rec.action = d.action;
      rec.fired_rule = d.clause_id;
      rec.fixations = synth_gaze(game.state, d.entities, game.inv, cfg.p_noise, gaze_rng);
      StepOutcome out = game.step(d.action);
      rec.score_delta = out.score_delta;
      ds.records.push_back(std::move(rec));
    }
    ds.episodes.push_back(game.summary(e));
    total_score += game.score;
    total_length += game.t;
  }
  ds.stats.samples = ds.records.size();
  ds.stats.trajectories = static_cast<std::size_t>(n_episodes);
  ds.stats.max_object_count = game.inv.max_count();
  ds.stats.mean_score = n_episodes > 0 ? total_score / n_episodes : 0;
  ds.stats.mean_length = n_episodes > 0 ? total_length / n_episodes : 0;
  return ds;
}

// --- dataset files ----------------------------------------------------

inline nlohmann::ordered_json record_to_json(const StepRecord& r, const EnvConfig& cfg,
                                             const ObjectInventory& inv) {
  nlohmann::ordered_json j;
  j["episode_id"] = r.episode_id;
  j["t"] = r.t;
  j["env"] = cfg.env_name;
  auto objs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.state.objects.size(); ++i) {
    const auto& o = r.state.objects[i];
    nlohmann::ordered_json jo;
    jo["slot"] = inv.slots[i].name;
    jo["type"] = inv.slots[i].type;
    jo["present"] = o.present;
    jo["x"] = o.x;
    jo["y"] = o.y;
    jo["w"] = o.width;
    jo["h"] = o.height;
    jo["orient"] = static_cast<int>(o.orientation);
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  j["action"] = static_cast<int>(r.action);
  auto fx = nlohmann::ordered_json::array();
  for (const auto& f : r.fixations) fx.push_back(nlohmann::ordered_json::array({f.x, f.y}));
  j["fixations"] = std::move(fx);
  j["fired_rule"] = r.fired_rule;
  j["score_delta"] = r.score_delta;
  return j;
}

inline void write_dataset(const Dataset& ds, const std::string& records_path,
                          const std::string& stats_path) {
  ObjectInventory inv = ds.cfg.inventory();
  std::ofstream out(records_path);
  if (!out) throw std::runtime_error("cannot write " + records_path);
  for (const auto& r : ds.records) out << record_to_json(r, ds.cfg, inv).dump() << "\n";
  out.close();
  if (!out) throw std::runtime_error("write failed for " + records_path);

  nlohmann::ordered_json js;
  js["env"] = ds.cfg.env_name;
  js["samples"] = ds.stats.samples;
  js["trajectories"] = ds.stats.trajectories;
  js["max_object_count"] = ds.stats.max_object_count;
  js["mean_score"] = ds.stats.mean_score;
  js["mean_length"] = ds.stats.mean_length;
  std::ofstream sout(stats_path);
  if (!sout) throw std::runtime_error("cannot write " + stats_path);
  sout << js.dump(2) << "\n";
}

// Reads a record file back. The environment name and the object list
// determine layout and inventory.
inline Dataset read_dataset(const std::string& records_path) {
  std::ifstream in(records_path);
  if (!in) throw std::runtime_error("cannot read " + records_path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& ex) {
      throw std::runtime_error(records_path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    StepRecord r;
    r.episode_id = j.at("episode_id").get<int>();
    r.t = j.at("t").get<int>();
    std::string env = j.at("env").get<std::string>();
    if (ds.records.empty()) {
      ds.cfg.env_name = env;
      ds.cfg.predicates = sharp_grid_predicates();
      for (const auto& jo : j.at("objects")) {
        ds.cfg.inventory_override.slots.push_back(
            {jo.at("slot").get<std::string>(), jo.at("type").get<std::string>()});
      }
      ds.cfg.inventory_override.env_name = env;
    }
    r.state.layout = env == "seaquest-mini" ? StateLayout::Seaquest : StateLayout::Asterix;
    for (const auto& jo : j.at("objects")) {
      ObjectState o;
      o.present = jo.at("present").get<bool>();
      o.x = jo.at("x").get<double>();
      o.y = jo.at("y").get<double>();
      o.width = jo.at("w").get<double>();
      o.height = jo.at("h").get<double>();
      o.orientation = jo.at("orient").get<int>() == 0 ? Orientation::Left : Orientation::Right;
      r.state.objects.push_back(o);
    }
    r.action = static_cast<Action>(j.at("action").get<int>());
    for (const auto& jf : j.at("fixations"))
      r.fixations.push_back({jf.at(0).get<double>(), jf.at(1).get<double>(), 1.0});
    r.fired_rule = j.at("fired_rule").get<int>();
    r.score_delta = j.at("score_delta").get<double>();
    ds.records.push_back(std::move(r));
  }
  ds.stats.samples = ds.records.size();
  std::vector<int> eps;
  for (const auto& r : ds.records) {
    if (std::find(eps.begin(), eps.end(), r.episode_id) == eps.end()) eps.push_back(r.episode_id);
  }
  ds.stats.trajectories = eps.size();
  ds.stats.max_object_count = ds.cfg.inventory_override.slots.size();
  return ds;
}

// --- rollout evaluation -----------------------------------------------

struct PolicyEvalResult {
  double mean_score = 0;
  double std_score = 0;
  double mean_length = 0;
  std::vector<double> scores;
};

inline PolicyEvalResult summarize_scores(const std::vector<double>& scores,
                                         const std::vector<double>& lengths) {
  PolicyEvalResult r;
  r.scores = scores;
  if (scores.empty()) return r;
  double n = static_cast<double>(scores.size());
  for (double s : scores) r.mean_score += s;
  r.mean_score /= n;
  for (double l : lengths) r.mean_length += l;
  r.mean_length /= n;
  double var = 0;
  for (double s : scores) var += (s - r.mean_score) * (s - r.mean_score);
  r.std_score = std::sqrt(var / n);
  return r;
}

// Greedy argmax rollouts of the weighted rule policy over n_seeds
// episodes, mirroring the 50-seed mean-score protocol.
inline PolicyEvalResult evaluate_policy(const RuleBase& rb, const ClauseWeights& weights,
                                        const ReasonerConfig& rcfg, const EnvConfig& cfg,
                                        int n_seeds = 50, std::uint64_t seed_base = 9000) {
  MiniGame game(cfg);
  AtomIndex idx = build_atom_index(rb, game.inv);
  InferenceGraph graph = compile(rb, idx, game.inv);
  std::vector<double> scores, lengths;
  for (int s = 0; s < n_seeds; ++s) {
    game.reset(detail::mix64(seed_base, static_cast<std::uint64_t>(s), 0xF0u));
    while (!game.terminal) {
      ValuationVector v0 = ground_valuation(game.state, cfg.predicates, idx, game.inv);
      ValuationVector vT = forward_chain(v0, weights, graph, rcfg);
      Action a = graph.actions[static_cast<std::size_t>(
          argmax_action_index(action_scores(vT, graph)))];
      game.step(a);
    }
    scores.push_back(game.score);
    lengths.push_back(game.t);
  }
  return summarize_scores(scores, lengths);
}

inline PolicyEvalResult evaluate_expert(const RuleBase& expert_rb, const EnvConfig& cfg,
                                        int n_seeds = 50, std::uint64_t seed_base = 9000) {
  MiniGame game(cfg);
  ScriptedExpert expert(expert_rb, game.inv, cfg.predicates);
  std::vector<double> scores, lengths;
  for (int s = 0; s < n_seeds; ++s) {
    game.reset(detail::mix64(seed_base, static_cast<std::uint64_t>(s), 0xF0u));
    while (!game.terminal) game.step(expert.decide(game.state).action);
    scores.push_back(game.score);
    lengths.push_back(game.t);
  }
  return summarize_scores(scores, lengths);
}

}  // namespace grail
