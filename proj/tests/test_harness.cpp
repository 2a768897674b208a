#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "grail/harness.hpp"

namespace {

const std::string kDataDir = GRAIL_DATA_DIR;
const std::string kCliPath = GRAIL_CLI_PATH;

int run_cli(const std::string& args) {
  std::string cmd = kCliPath + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
#ifdef _WIN32
  return status;
#else
  return WEXITSTATUS(status);
#endif
}

grail::Dataset make_dataset(int episodes = 8, std::uint64_t seed = 3, int episode_length = 40) {
  auto cfg = grail::asterix_env_config(1);
  cfg.seed = seed;
  cfg.episode_length = episode_length;
  auto rb = grail::parse_rulebase(grail::read_text_file(kDataDir + "/asterix.rules"),
                                  grail::asterix_signatures());
  return grail::generate_dataset(cfg, episodes, rb);
}

grail::CompiledRules compile_asterix(const grail::EnvConfig& cfg) {
  return grail::load_rules(kDataDir + "/asterix.rules", cfg.env_name, cfg.inventory());
}

}  // namespace

TEST_CASE("training samples ground every record, gaze only attenuates") {
  auto ds = make_dataset();
  auto cr = compile_asterix(ds.cfg);
  auto plain = grail::build_training_samples(ds, cr, /*use_gaze=*/false);
  auto gazed = grail::build_training_samples(ds, cr, /*use_gaze=*/true);
  REQUIRE(plain.size() == ds.records.size());
  REQUIRE(gazed.size() == plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(plain[i].episode_id == ds.records[i].episode_id);
    CHECK(plain[i].action_index >= 0);
    CHECK(plain[i].action_index < static_cast<int>(cr.graph.actions.size()));
    REQUIRE(gazed[i].valuation.size() == plain[i].valuation.size());
    for (std::size_t k = 0; k < plain[i].valuation.size(); ++k) {
      CHECK(plain[i].valuation[k] >= 0.0);
      CHECK(plain[i].valuation[k] <= 1.0);
      CHECK(gazed[i].valuation[k] <= plain[i].valuation[k] + 1e-12);
    }
  }
}

TEST_CASE("uncovered expert actions are reported with their location") {
  auto ds = make_dataset(3);
  // a rule base whose heads cover only noop cannot label Up/Right/...
  auto cr = grail::compile_rules_text(
      "noop_far_enemy(X) :- closest(O1,O2), type(O1,player), type(O2,enemy), "
      "notcloseby(O1,O2), visible(O2).",
      grail::asterix_signatures(), ds.cfg.inventory());
  bool moved = false;
  for (const auto& r : ds.records) moved = moved || r.action != grail::Action::Noop;
  REQUIRE(moved);
  CHECK_THROWS_WITH_AS(grail::build_training_samples(ds, cr, false),
                       doctest::Contains("not covered"), std::runtime_error);
}

TEST_CASE("trajectory subsampling is seeded, by-episode and validated") {
  auto ds = make_dataset(10);
  auto half = grail::subsample_trajectories(ds, 0.5, 99);
  CHECK(half.stats.trajectories == 5);
  CHECK(half.stats.samples == half.records.size());
  // whole trajectories survive: each kept episode keeps all its records
  for (const auto& e : half.episodes) {
    std::size_t n = 0;
    for (const auto& r : half.records) n += (r.episode_id == e.episode_id);
    std::size_t full = 0;
    for (const auto& r : ds.records) full += (r.episode_id == e.episode_id);
    CHECK(n == full);
  }
  auto again = grail::subsample_trajectories(ds, 0.5, 99);
  CHECK(again.stats.samples == half.stats.samples);
  for (std::size_t i = 0; i < half.records.size(); ++i) {
    CHECK(again.records[i].episode_id == half.records[i].episode_id);
    CHECK(again.records[i].t == half.records[i].t);
  }
  // a different seed may select different episodes, never more of them
  auto other = grail::subsample_trajectories(ds, 0.5, 100);
  CHECK(other.stats.trajectories == 5);

  CHECK(grail::subsample_trajectories(ds, 1.0, 1).records.size() == ds.records.size());
  CHECK(grail::subsample_trajectories(ds, 0.01, 1).stats.trajectories == 1);  // floor of one
  CHECK_THROWS(grail::subsample_trajectories(ds, 0.0, 1));
  CHECK_THROWS(grail::subsample_trajectories(ds, 1.5, 1));
}

TEST_CASE("inspect table sorts rules by descending weight") {
  auto rb = grail::parse_rulebase(grail::read_text_file(kDataDir + "/asterix.rules"),
                                  grail::asterix_signatures());
  grail::ClauseWeights w;
  w.w.assign(rb.size(), 0.1);
  // left_bonus is the last clause in the file
  w.w.back() = 0.818;
  std::string table = grail::inspect_table(rb, w);
  std::istringstream is(table);
  std::string header, top;
  std::getline(is, header);
  std::getline(is, top);
  CHECK(header.find("Rule") == 0);
  CHECK(header.find("Primary condition") != std::string::npos);
  CHECK(header.find("Weight") != std::string::npos);
  CHECK(top.find("left_bonus") == 0);
  CHECK(top.find("0.8180") != std::string::npos);
  CHECK(top.find("on_right(O1,O2)") != std::string::npos);  // type/visible filtered out
  CHECK(top.find("type(") == std::string::npos);
}

TEST_CASE("primary_condition keeps the first two informative atoms") {
  auto rb = grail::parse_rulebase(
      "up_dodge_left(X) :- on_right(O1,O2), type(O1,player), type(O2,enemy), same_row(O1,O2), "
      "closeby(O1,O2), visible(O2).",
      grail::asterix_signatures());
  CHECK(grail::primary_condition(rb.clauses[0]) == "on_right(O1,O2), same_row(O1,O2)");
  auto trivial = grail::parse_rulebase("noop_far_enemy(X) :- visible(O1).",
                                       grail::asterix_signatures());
  CHECK(grail::primary_condition(trivial.clauses[0]) == "-");
}

TEST_CASE("train reports serialize deterministically as JSONL") {
  auto ds = make_dataset(6);
  auto cr = compile_asterix(ds.cfg);
  grail::TrainConfig tc;
  tc.max_epochs = 3;
  tc.validation_fraction = 0.2;
  tc.seed = 8;
  auto r1 = grail::train_on_dataset(ds, cr, tc, grail::ReasonerConfig{}, true);
  auto r2 = grail::train_on_dataset(ds, cr, tc, grail::ReasonerConfig{}, true);
  std::string t1 = grail::format_train_report(r1);
  std::string t2 = grail::format_train_report(r2);
  CHECK(t1 == t2);  // wall clock is excluded on purpose

  // every line is valid JSON; the last line is the summary
  std::istringstream is(t1);
  std::string line, last;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    CHECK_NOTHROW(nlohmann::json::parse(line));
    last = line;
    ++lines;
  }
  CHECK(lines == r1.epochs.size() + 1);
  auto j = nlohmann::json::parse(last);
  CHECK(j.contains("stopping_reason"));
  CHECK(j.contains("best_val_loss"));
  CHECK(j.contains("train_samples"));
}

TEST_CASE("results tables render and serialize") {
  grail::ResultsTable t;
  t.rows.push_back({"grail", "fraction=0.25", 312.5, 41.0, 50, 0.97});
  t.rows.push_back({"nsfr-il", "fraction=0.25", 120.0, 80.0, 50, -1});
  std::string text = t.render();
  CHECK(text.find("grail") != std::string::npos);
  CHECK(text.find("312.5 +/- 41.0") != std::string::npos);
  CHECK(text.find("0.9700") != std::string::npos);

  std::istringstream is(t.to_jsonl());
  std::string line;
  std::getline(is, line);
  auto j1 = nlohmann::json::parse(line);
  CHECK(j1.at("accuracy").get<double>() == 0.97);
  std::getline(is, line);
  auto j2 = nlohmann::json::parse(line);
  CHECK(!j2.contains("accuracy"));  // unmeasured accuracy is omitted
}

TEST_CASE("held-out accuracy is computed without the gaze channel") {
  auto ds = make_dataset(6);
  auto cr = compile_asterix(ds.cfg);
  grail::ClauseWeights w;
  w.w.assign(cr.rb.size(), 0.9);
  double acc = grail::heldout_accuracy(ds, cr, w, grail::ReasonerConfig{});
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  double manual = grail::action_accuracy(grail::build_training_samples(ds, cr, false), w,
                                         cr.graph, grail::ReasonerConfig{});
  CHECK(acc == manual);
}

TEST_CASE("parallel_cells covers every index once and propagates exceptions") {
  std::vector<std::atomic<int>> hits(23);
  grail::parallel_cells(hits.size(), 4, [&hits](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(grail::parallel_cells(8, 3,
                                        [](std::size_t i) {
                                          if (i == 5) throw std::runtime_error("boom");
                                        }),
                  std::runtime_error);
}

TEST_CASE("sweep protocol produces one row per method and fraction") {
  auto ds = make_dataset(8, 5, 30);
  auto eval_ds = make_dataset(3, 77, 30);
  auto cr = compile_asterix(ds.cfg);
  grail::TrainConfig tc;
  tc.max_epochs = 2;
  tc.validation_fraction = 0.2;
  grail::SweepOptions opts;
  opts.fractions = {0.5, 1.0};
  opts.methods = {"grail", "nsfr-il"};
  opts.eval_seeds = 2;
  opts.jobs = 2;
  auto table = grail::run_sweep(ds, eval_ds, cr, tc, grail::ReasonerConfig{}, ds.cfg, opts);
  REQUIRE(table.rows.size() == 4);
  for (const auto& r : table.rows) {
    CHECK((r.method == "grail" || r.method == "nsfr-il"));
    CHECK(r.cell.rfind("fraction=", 0) == 0);
    CHECK(r.n_seeds == 2);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }
  // parallel and serial schedules agree exactly
  opts.jobs = 1;
  auto serial = grail::run_sweep(ds, eval_ds, cr, tc, grail::ReasonerConfig{}, ds.cfg, opts);
  CHECK(serial.to_jsonl() == table.to_jsonl());
}

TEST_CASE("generalization protocol transfers weights across object counts") {
  auto env = grail::asterix_env_config(1);
  env.seed = 12;
  env.episode_length = 30;
  grail::TrainConfig tc;
  tc.max_epochs = 2;
  tc.validation_fraction = 0.2;
  grail::GeneralizeOptions opts;
  opts.train_counts = {1};
  opts.eval_counts = {1, 2};
  opts.episodes = 6;
  opts.eval_seeds = 2;
  auto table = grail::run_generalize(grail::read_text_file(kDataDir + "/asterix.rules"), env, tc,
                                     grail::ReasonerConfig{}, opts);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].cell == "train=1,eval=1");
  CHECK(table.rows[1].cell == "train=1,eval=2");
}

TEST_CASE("rule loading validates inputs") {
  auto cfg = grail::asterix_env_config(1);
  CHECK_THROWS(grail::load_rules(kDataDir + "/no_such.rules", cfg.env_name, cfg.inventory()));
  CHECK_THROWS_AS(grail::compile_rules_text("up_lure(X) :- nope(O1).",
                                            grail::asterix_signatures(), cfg.inventory()),
                  grail::ParseError);
  CHECK_THROWS(grail::signatures_for_env("pong"));
}

TEST_CASE("CLI exit codes follow the contract") {
  // usage errors exit with 2
  CHECK(run_cli("gen-data --env asterix-mini") == 2);          // missing --out
  CHECK(run_cli("no-such-verb") == 2);
  CHECK(run_cli("") == 2);                                     // a verb is required
  // help exits cleanly
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("gen-data --help") == 0);
  // runtime errors exit with 1
  CHECK(run_cli("train --data /nonexistent/records.jsonl --rules " + kDataDir +
                "/asterix.rules --out /tmp/grail_test_out") == 1);
}

TEST_CASE("CLI gen-data is byte-reproducible") {
  std::string dir1 = "cli_repro_1", dir2 = "cli_repro_2";
  std::filesystem::create_directories(dir1);
  std::filesystem::create_directories(dir2);
  std::string common = "gen-data --env asterix-mini --seed 7 --episodes 3 --rules " + kDataDir +
                       "/asterix.rules --out ";
  REQUIRE(run_cli(common + dir1) == 0);
  REQUIRE(run_cli(common + dir2) == 0);
  CHECK(grail::read_text_file(dir1 + "/records.jsonl") ==
        grail::read_text_file(dir2 + "/records.jsonl"));
  CHECK(grail::read_text_file(dir1 + "/stats.json") == grail::read_text_file(dir2 + "/stats.json"));
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}
