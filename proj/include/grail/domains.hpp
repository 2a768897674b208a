#pragma once

// Built-in predicate signatures and object inventories for the supported
// environments.

#include "grail/grounding.hpp"

namespace grail {

inline SignatureSet asterix_signatures() {
  SignatureSet s;
  auto soft = [&s](const char* name, std::vector<Sort> sorts) {
    s.add({name, static_cast<int>(sorts.size()), std::move(sorts), PredicateKind::BodySoft});
  };
  auto crisp = [&s](const char* name, std::vector<Sort> sorts) {
    s.add({name, static_cast<int>(sorts.size()), std::move(sorts), PredicateKind::BodyCrisp});
  };
  auto head = [&s](const char* name) {
    s.add({name, 1, {"object"}, PredicateKind::ActionHead});
  };

  soft("closest", {"object", "object"});
  soft("closeby", {"object", "object"});
  soft("notcloseby", {"object", "object"});
  soft("same_row", {"object", "object"});
  soft("on_left", {"object", "object"});
  soft("on_right", {"object", "object"});
  soft("above_row", {"object", "object"});
  soft("below_row", {"object", "object"});
  soft("at_top", {"object"});
  soft("at_bottom", {"object"});
  crisp("on_even", {"object"});
  crisp("on_odd", {"object"});
  crisp("visible", {"object"});
  crisp("type", {"object", "type_label"});

  head("noop_far_enemy");
  head("noop_no_bonus");
  head("up_dodge_left");
  head("up_dodge_right");
  head("down_dodge_left");
  head("down_dodge_right");
  head("up_bonus_left");
  head("up_bonus_right");
  head("down_bonus_left");
  head("down_bonus_right");
  head("right_bonus");
  head("left_bonus");
  // lure heads used by the spurious-distractor ablation rule base
  head("up_lure");
  head("down_lure");
  head("left_lure");
  head("right_lure");
  return s;
}

inline SignatureSet seaquest_signatures() {
  SignatureSet s;
  auto soft = [&s](const char* name, std::vector<Sort> sorts) {
    s.add({name, static_cast<int>(sorts.size()), std::move(sorts), PredicateKind::BodySoft});
  };
  auto crisp = [&s](const char* name, std::vector<Sort> sorts) {
    s.add({name, static_cast<int>(sorts.size()), std::move(sorts), PredicateKind::BodyCrisp});
  };
  auto head = [&s](const char* name) {
    s.add({name, 1, {"object"}, PredicateKind::ActionHead});
  };

  soft("oxygen_low", {"oxygen_bar"});
  soft("same_depth_enemy", {"player", "enemy"});
  soft("same_depth_missile", {"player", "missile"});
  crisp("visible_enemy", {"enemy"});
  crisp("visible_missile", {"missile"});
  crisp("visible_diver", {"diver"});
  crisp("facing_left", {"player"});
  crisp("facing_right", {"player"});
  soft("right_of_enemy", {"player", "enemy"});
  soft("left_of_enemy", {"player", "enemy"});
  soft("right_of_diver", {"player", "diver"});
  soft("left_of_diver", {"player", "diver"});
  soft("higher_than_enemy", {"player", "enemy"});
  soft("deeper_than_enemy", {"player", "enemy"});
  soft("higher_than_diver", {"player", "diver"});
  soft("deeper_than_diver", {"player", "diver"});
  soft("close_by_enemy", {"player", "enemy"});
  soft("not_close_by_enemy", {"player", "enemy"});
  soft("close_by_missile", {"player", "missile"});
  soft("close_by_diver", {"player", "diver"});
  crisp("divers_collected_full", {"diver"});
  soft("above_water", {"player"});
  soft("below_water", {"player"});

  head("up_air");
  head("fire_left");
  head("fire_right");
  head("left_aim");
  head("right_aim");
  head("down_aim");
  head("up_aim");
  head("up_evade");
  head("down_evade");
  head("left_to_diver");
  head("right_to_diver");
  head("up_to_diver");
  head("down_to_diver");
  head("noop_divers_full");
  head("up_return_divers");
  head("noop_evade");
  return s;
}

inline ObjectInventory asterix_inventory(int objects_per_type, int distractors = 0) {
  ObjectInventory inv;
  inv.env_name = "asterix-mini";
  inv.slots.push_back({"player", "player"});
  for (int i = 0; i < objects_per_type; ++i)
    inv.slots.push_back({"enemy" + std::to_string(i + 1), "enemy"});
  for (int i = 0; i < objects_per_type; ++i)
    inv.slots.push_back({"bonus" + std::to_string(i + 1), "bonus"});
  for (int i = 0; i < distractors; ++i)
    inv.slots.push_back({"distractor" + std::to_string(i + 1), "distractor"});
  return inv;
}

// Full-scale Asterix inventory: 25 object slots.
inline ObjectInventory asterix_inventory_full() { return asterix_inventory(12); }

inline ObjectInventory seaquest_inventory(int enemies, int missiles, int divers) {
  ObjectInventory inv;
  inv.env_name = "seaquest-mini";
  inv.slots.push_back({"player", "player"});
  inv.slots.push_back({"oxygen_bar", "oxygen_bar"});
  for (int i = 0; i < enemies; ++i)
    inv.slots.push_back({"enemy" + std::to_string(i + 1), "enemy"});
  for (int i = 0; i < missiles; ++i)
    inv.slots.push_back({"missile" + std::to_string(i + 1), "missile"});
  for (int i = 0; i < divers; ++i)
    inv.slots.push_back({"diver" + std::to_string(i + 1), "diver"});
  for (int i = 0; i < divers; ++i)
    inv.slots.push_back({"collected_diver" + std::to_string(i + 1), "collected_diver"});
  return inv;
}

// Full-scale Seaquest inventory: 49 object slots.
inline ObjectInventory seaquest_inventory_full() { return seaquest_inventory(23, 12, 6); }

// Freeway ships as an inventory preset only; no rule base or scripted
// expert exists for it.
inline ObjectInventory freeway_inventory() {
  ObjectInventory inv;
  inv.env_name = "freeway";
  inv.slots.push_back({"chicken", "player"});
  for (int i = 0; i < 11; ++i) inv.slots.push_back({"car" + std::to_string(i + 1), "car"});
  return inv;
}

}  // namespace grail
