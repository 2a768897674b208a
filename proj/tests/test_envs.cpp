#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "grail/envs.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const std::string kDataDir = GRAIL_DATA_DIR;

grail::RuleBase asterix_rules() {
  return grail::parse_rulebase(slurp(kDataDir + "/asterix.rules"), grail::asterix_signatures());
}

grail::RuleBase seaquest_rules() {
  return grail::parse_rulebase(slurp(kDataDir + "/seaquest.rules"),
                               grail::seaquest_signatures());
}

// A hand-built Asterix state over the 1-enemy 1-bonus inventory
// (slots: 0 player, 1 enemy, 2 bonus).
grail::LogicState make_state(const grail::EnvConfig& cfg, int pc, int pr, int ec, int er, int bc,
                             int br) {
  grail::LogicState s;
  s.layout = grail::StateLayout::Asterix;
  s.objects.assign(cfg.inventory().slots.size(), grail::ObjectState{});
  auto put = [&](int slot, int c, int r) {
    s.objects[static_cast<std::size_t>(slot)].present = true;
    s.objects[static_cast<std::size_t>(slot)].x = (c + 0.5) * cfg.cell_w();
    s.objects[static_cast<std::size_t>(slot)].y = (r + 0.5) * cfg.cell_h();
  };
  put(0, pc, pr);
  put(1, ec, er);
  put(2, bc, br);
  return s;
}

std::string dump_records(const grail::Dataset& ds) {
  auto inv = ds.cfg.inventory();
  std::string out;
  for (const auto& r : ds.records) out += grail::record_to_json(r, ds.cfg, inv).dump() + "\n";
  return out;
}

}  // namespace

TEST_CASE("reset is deterministic and conforms to the documented layout") {
  auto cfg = grail::asterix_env_config(2);
  grail::MiniGame a(cfg), b(cfg);
  a.reset(123);
  b.reset(123);
  REQUIRE(a.state.objects.size() == b.state.objects.size());
  for (std::size_t i = 0; i < a.state.objects.size(); ++i) {
    CHECK(a.state.objects[i].x == b.state.objects[i].x);
    CHECK(a.state.objects[i].y == b.state.objects[i].y);
    CHECK(a.state.objects[i].present == b.state.objects[i].present);
  }
  // player starts at cell (2,2); everything spawns present
  int player = a.inv.player_slot();
  CHECK(a.col_of(player) == 2);
  CHECK(a.row_of(player) == 2);
  for (const auto& o : a.state.objects) CHECK(o.present);
  // enemies spawn on distinct rows away from the player's row
  auto enemies = a.slots_of_type("enemy");
  std::vector<int> rows;
  for (int e : enemies) {
    CHECK(a.row_of(e) != a.row_of(player));
    rows.push_back(a.row_of(e));
  }
  std::sort(rows.begin(), rows.end());
  CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
}

TEST_CASE("asterix step semantics: movement, bonus pickup, collision") {
  auto cfg = grail::asterix_env_config(1);
  grail::MiniGame g(cfg);
  g.reset(9);
  int player = g.inv.player_slot();
  int bonus = g.slots_of_type("bonus")[0];
  int enemy = g.slots_of_type("enemy")[0];

  SUBCASE("noop leaves the player fixed while enemies advance one column") {
    int pc = g.col_of(player), pr = g.row_of(player);
    int ec = g.col_of(enemy), er = g.row_of(enemy);
    int dir = er % 2 == 1 ? 1 : -1;
    auto out = g.step(grail::Action::Noop);
    CHECK(g.col_of(player) == pc);
    CHECK(g.row_of(player) == pr);
    CHECK(g.col_of(enemy) == (ec + dir + cfg.cols) % cfg.cols);
    CHECK(g.row_of(enemy) == er);
    CHECK(out.score_delta == 0);
  }

  SUBCASE("walking onto the bonus scores 50 and relocates it") {
    // steer the bonus under the player deterministically by teleporting
    // the pieces into a known configuration
    g.place(player, 1, 0);
    g.place(enemy, 5, 5);  // far away, even row moving left
    g.place(bonus, 2, 0);
    auto out = g.step(grail::Action::Right);
    CHECK(out.score_delta == 50);
    CHECK(g.score == 50);
    // the bonus moved off the player's cell
    bool same = g.col_of(bonus) == g.col_of(player) && g.row_of(bonus) == g.row_of(player);
    CHECK(!same);
  }

  SUBCASE("meeting an enemy in the same cell ends the episode") {
    // moves resolve simultaneously: the enemy on even row 0 sweeps left
    // from (3,0) to (2,0) while the player steps right into (2,0)
    g.place(player, 1, 0);
    g.place(enemy, 3, 0);
    g.place(bonus, 5, 4);
    auto out = g.step(grail::Action::Right);
    CHECK(out.terminal);
    CHECK(g.terminal_reason == "collision");
    CHECK_THROWS(g.step(grail::Action::Noop));
  }

  SUBCASE("movement clips at the grid border") {
    g.place(player, 0, 0);
    g.place(enemy, 5, 5);
    g.place(bonus, 3, 3);
    g.step(grail::Action::Up);
    CHECK(g.row_of(player) == 0);
    g.step(grail::Action::Left);
    CHECK(g.col_of(player) == 0);
  }
}

TEST_CASE("illegal action ids are rejected") {
  grail::MiniGame g(grail::asterix_env_config(1));
  CHECK_THROWS(g.step(-1));
  CHECK_THROWS(g.step(6));
  CHECK_NOTHROW(g.step(0));
}

TEST_CASE("expert decisions on crafted scenarios") {
  auto cfg = grail::asterix_env_config(1);
  auto rb = asterix_rules();
  grail::ScriptedExpert expert(rb, cfg.inventory(), cfg.predicates);

  SUBCASE("close enemy approaching from the right on an even row: dodge up") {
    // player at bottom (row 4), enemy two cells to its right on the same
    // even row; dodge rules outrank everything else
    auto s = make_state(cfg, 2, 4, 4, 4, 0, 0);
    auto d = expert.decide(s);
    CHECK(d.action == grail::Action::Up);
    CHECK(rb.clauses[static_cast<std::size_t>(d.clause_id)].head.predicate == "up_dodge_right");
    CHECK(std::find(d.entities.begin(), d.entities.end(), 0) != d.entities.end());
    CHECK(std::find(d.entities.begin(), d.entities.end(), 1) != d.entities.end());
  }

  SUBCASE("bonus on the same row with no threat: move toward it") {
    auto s = make_state(cfg, 2, 2, 5, 5, 4, 2);
    auto d = expert.decide(s);
    CHECK(d.action == grail::Action::Right);
    CHECK(rb.clauses[static_cast<std::size_t>(d.clause_id)].head.predicate == "right_bonus");
  }

  SUBCASE("everything far away: noop fallback rule") {
    auto s = make_state(cfg, 2, 2, 5, 0, 5, 5);
    auto d = expert.decide(s);
    CHECK(d.action == grail::Action::Noop);
    CHECK(d.clause_id >= 0);
  }
}

TEST_CASE("an empty rule base yields a permanent noop expert") {
  auto cfg = grail::asterix_env_config(1);
  grail::RuleBase empty;
  empty.signatures = grail::asterix_signatures();
  grail::ScriptedExpert expert(empty, cfg.inventory(), cfg.predicates);
  auto s = make_state(cfg, 2, 2, 3, 2, 4, 2);
  auto d = expert.decide(s);
  CHECK(d.action == grail::Action::Noop);
  CHECK(d.clause_id == -1);
  CHECK(d.entities.empty());
}

TEST_CASE("synthetic gaze fixates the entities of the fired clause") {
  auto cfg = grail::asterix_env_config(1);
  auto inv = cfg.inventory();
  auto s = make_state(cfg, 1, 1, 3, 3, 5, 5);
  grail::Rng rng(4);

  auto fx = grail::synth_gaze(s, {0, 1}, inv, 0.0, rng);
  REQUIRE(fx.size() == 2);
  CHECK(fx[0].x == s.objects[0].x);
  CHECK(fx[0].y == s.objects[0].y);
  CHECK(fx[1].x == s.objects[1].x);
  CHECK(fx[1].y == s.objects[1].y);

  // no entities: fall back to the player
  auto fb = grail::synth_gaze(s, {}, inv, 0.0, rng);
  REQUIRE(fb.size() == 1);
  CHECK(fb[0].x == s.objects[0].x);

  // p_noise = 1 with other entities present adds exactly one stray fixation
  auto noisy = grail::synth_gaze(s, {0, 1}, inv, 1.0, rng);
  CHECK(noisy.size() == 3);
}

TEST_CASE("dataset generation is deterministic and self-consistent") {
  auto cfg = grail::asterix_env_config(1);
  cfg.seed = 77;
  cfg.episode_length = 40;
  auto rb = asterix_rules();
  auto a = grail::generate_dataset(cfg, 5, rb);
  auto b = grail::generate_dataset(cfg, 5, rb);
  CHECK(dump_records(a) == dump_records(b));

  CHECK(a.stats.samples == a.records.size());
  CHECK(a.stats.trajectories == 5);
  CHECK(a.stats.max_object_count == cfg.inventory().max_count());
  CHECK(a.episodes.size() == 5);

  // per-episode score equals the sum of recorded deltas
  for (const auto& ep : a.episodes) {
    double total = 0;
    int len = 0;
    for (const auto& r : a.records) {
      if (r.episode_id != ep.episode_id) continue;
      total += r.score_delta;
      ++len;
    }
    CHECK(total == doctest::Approx(ep.score));
    CHECK(len == ep.length);
    CHECK((ep.terminal_reason == "collision" || ep.terminal_reason == "length_cap"));
  }

  // fixations stay inside the frame
  for (const auto& r : a.records) {
    for (const auto& f : r.fixations) {
      CHECK(f.x >= 0);
      CHECK(f.x <= cfg.frame_w);
      CHECK(f.y >= 0);
      CHECK(f.y <= cfg.frame_h);
    }
  }
}

TEST_CASE("recorded trajectories replay exactly through the environment") {
  auto cfg = grail::asterix_env_config(2);
  cfg.seed = 31;
  cfg.episode_length = 30;
  auto ds = grail::generate_dataset(cfg, 3, asterix_rules());
  grail::MiniGame g(cfg);
  for (int e = 0; e < 3; ++e) {
    g.reset(grail::detail::mix64(cfg.seed, static_cast<std::uint64_t>(e), 0xE0u));
    for (const auto& r : ds.records) {
      if (r.episode_id != e) continue;
      REQUIRE(!g.terminal);
      for (std::size_t i = 0; i < g.state.objects.size(); ++i) {
        CHECK(g.state.objects[i].x == r.state.objects[i].x);
        CHECK(g.state.objects[i].y == r.state.objects[i].y);
        CHECK(g.state.objects[i].present == r.state.objects[i].present);
      }
      auto out = g.step(r.action);
      CHECK(out.score_delta == r.score_delta);
    }
    CHECK(g.terminal);
  }
}

TEST_CASE("zero episodes produce an empty dataset with zero stats") {
  auto cfg = grail::asterix_env_config(1);
  auto ds = grail::generate_dataset(cfg, 0, asterix_rules());
  CHECK(ds.records.empty());
  CHECK(ds.stats.samples == 0);
  CHECK(ds.stats.trajectories == 0);
  CHECK(ds.stats.mean_score == 0);
}

TEST_CASE("dataset files round trip through disk") {
  auto cfg = grail::asterix_env_config(1);
  cfg.seed = 55;
  cfg.episode_length = 25;
  auto ds = grail::generate_dataset(cfg, 3, asterix_rules());
  std::string rec_path = "envs_roundtrip_records.jsonl";
  std::string stats_path = "envs_roundtrip_stats.json";
  grail::write_dataset(ds, rec_path, stats_path);
  auto back = grail::read_dataset(rec_path);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.cfg.env_name == cfg.env_name);
  CHECK(back.cfg.inventory().slots.size() == cfg.inventory().slots.size());
  CHECK(back.stats.trajectories == ds.stats.trajectories);
  CHECK(back.stats.max_object_count == ds.stats.max_object_count);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].episode_id == ds.records[i].episode_id);
    CHECK(back.records[i].t == ds.records[i].t);
    CHECK(back.records[i].action == ds.records[i].action);
    CHECK(back.records[i].fired_rule == ds.records[i].fired_rule);
    CHECK(back.records[i].score_delta == ds.records[i].score_delta);
    REQUIRE(back.records[i].state.objects.size() == ds.records[i].state.objects.size());
    for (std::size_t k = 0; k < ds.records[i].state.objects.size(); ++k) {
      CHECK(back.records[i].state.objects[k].x == ds.records[i].state.objects[k].x);
      CHECK(back.records[i].state.objects[k].y == ds.records[i].state.objects[k].y);
      CHECK(back.records[i].state.objects[k].present == ds.records[i].state.objects[k].present);
    }
  }
  std::remove(rec_path.c_str());
  std::remove(stats_path.c_str());
  CHECK_THROWS(grail::read_dataset("no_such_records.jsonl"));
}

TEST_CASE("correlated spurious placement tracks the expert action") {
  auto cfg = grail::asterix_env_config(1, /*distractors=*/1);
  cfg.seed = 13;
  cfg.p_noise = 0;
  cfg.episode_length = 40;
  auto ds = grail::generate_dataset(cfg, 4, asterix_rules(), grail::SpuriousMode::Correlated);
  auto inv = cfg.inventory();
  int dslot = -1;
  for (std::size_t i = 0; i < inv.slots.size(); ++i) {
    if (inv.slots[i].type == "distractor") dslot = static_cast<int>(i);
  }
  REQUIRE(dslot >= 0);
  int player = inv.player_slot();
  double cw = cfg.cell_w(), ch = cfg.cell_h();
  int correlated_present = 0;
  for (const auto& r : ds.records) {
    const auto& d = r.state.objects[static_cast<std::size_t>(dslot)];
    const auto& p = r.state.objects[static_cast<std::size_t>(player)];
    if (r.action == grail::Action::Noop || r.action == grail::Action::Fire) {
      CHECK(!d.present);
      continue;
    }
    if (!d.present) continue;  // border clip can suppress the lure
    ++correlated_present;
    int dc = static_cast<int>(d.x / cw), dr = static_cast<int>(d.y / ch);
    int pc = static_cast<int>(p.x / cw), pr = static_cast<int>(p.y / ch);
    switch (r.action) {
      case grail::Action::Up: CHECK((dc == pc && dr == pr - 1)); break;
      case grail::Action::Down: CHECK((dc == pc && dr == pr + 1)); break;
      case grail::Action::Left: CHECK((dr == pr && dc == pc - 1)); break;
      case grail::Action::Right: CHECK((dr == pr && dc == pc + 1)); break;
      default: break;
    }
  }
  CHECK(correlated_present > 0);
}

TEST_CASE("randomized spurious placement keeps the distractor present") {
  auto cfg = grail::asterix_env_config(1, /*distractors=*/1);
  cfg.seed = 14;
  cfg.episode_length = 30;
  auto ds = grail::generate_dataset(cfg, 2, asterix_rules(), grail::SpuriousMode::Randomized);
  auto inv = cfg.inventory();
  int dslot = -1;
  for (std::size_t i = 0; i < inv.slots.size(); ++i) {
    if (inv.slots[i].type == "distractor") dslot = static_cast<int>(i);
  }
  for (const auto& r : ds.records) {
    CHECK(r.state.objects[static_cast<std::size_t>(dslot)].present);
  }
}

TEST_CASE("seaquest episodes run, score and replay") {
  auto cfg = grail::seaquest_env_config(1);
  cfg.seed = 21;
  cfg.episode_length = 80;
  auto rb = seaquest_rules();
  auto ds = grail::generate_dataset(cfg, 3, rb);
  CHECK(!ds.records.empty());
  for (const auto& ep : ds.episodes) {
    CHECK(ep.score >= 0);
    CHECK((ep.terminal_reason == "collision" || ep.terminal_reason == "oxygen" ||
           ep.terminal_reason == "length_cap"));
  }
  // replay the recorded actions
  grail::MiniGame g(cfg);
  g.reset(grail::detail::mix64(cfg.seed, 0, 0xE0u));
  double total = 0;
  for (const auto& r : ds.records) {
    if (r.episode_id != 0) continue;
    total += g.step(r.action).score_delta;
  }
  CHECK(total == doctest::Approx(ds.episodes[0].score));
}

TEST_CASE("seaquest oxygen depletes underwater and refills at the surface") {
  auto cfg = grail::seaquest_env_config(1);
  grail::MiniGame g(cfg);
  g.reset(3);
  double o0 = g.oxygen();
  g.step(grail::Action::Noop);  // stays underwater at row 2
  CHECK(g.oxygen() == doctest::Approx(o0 - cfg.oxygen_decay));
  g.step(grail::Action::Up);
  g.step(grail::Action::Up);  // reaches the surface row
  CHECK(g.oxygen() == 1.0);
}

TEST_CASE("expert rollouts achieve a positive mean score") {
  auto cfg = grail::asterix_env_config(1);
  cfg.episode_length = 100;
  auto res = grail::evaluate_expert(asterix_rules(), cfg, 10, 4242);
  CHECK(res.mean_score > 0);
  CHECK(res.mean_length > 0);
  CHECK(res.scores.size() == 10);

  auto one = grail::evaluate_expert(asterix_rules(), cfg, 1, 4242);
  CHECK(one.std_score == 0.0);
  CHECK(one.mean_score == one.scores[0]);
}

TEST_CASE("policy rollouts with saturated true-rule weights match the reward trend") {
  auto cfg = grail::asterix_env_config(1);
  cfg.episode_length = 100;
  auto rb = asterix_rules();
  grail::ClauseWeights w;
  w.w.assign(rb.size(), 1.0);
  auto res = grail::evaluate_policy(rb, w, grail::ReasonerConfig{}, cfg, 5, 777);
  CHECK(res.scores.size() == 5);
  CHECK(res.mean_score >= 0);
}

TEST_CASE("config presets reject unknown environments") {
  CHECK_THROWS(grail::env_config_for("pong"));
  auto freeway = grail::env_config_for("freeway");
  CHECK_THROWS(grail::MiniGame{freeway});  // preset without playable dynamics
}
