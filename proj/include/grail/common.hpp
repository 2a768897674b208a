#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grail {

inline double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Deterministic RNG. std::uniform_real_distribution is implementation
// defined, so doubles are derived from raw bits directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double next_double() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // uniform in [0, n)
  std::uint64_t next_below(std::uint64_t n) {
    // rejection sampling keeps the draw unbiased
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  int next_int(int lo, int hi_exclusive) {
    return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_exclusive - lo)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used to tie weight files to the rule file they were trained on.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a_hex(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(s);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// Game actions shared by every environment. The ordering is fixed; rule
// bases expose the subset their heads cover, in this order.
enum class Action : int { Noop = 0, Up = 1, Right = 2, Left = 3, Down = 4, Fire = 5 };

inline constexpr int kNumActions = 6;

inline const char* action_name(Action a) {
  switch (a) {
    case Action::Noop: return "noop";
    case Action::Up: return "up";
    case Action::Right: return "right";
    case Action::Left: return "left";
    case Action::Down: return "down";
    case Action::Fire: return "fire";
  }
  return "?";
}

// Head predicates encode their action as the leading name segment,
// e.g. up_dodge_left -> up, fire_right -> fire.
inline Action action_of_head(std::string_view head_name) {
  auto pos = head_name.find('_');
  std::string_view prefix = pos == std::string_view::npos ? head_name : head_name.substr(0, pos);
  if (prefix == "noop") return Action::Noop;
  if (prefix == "up") return Action::Up;
  if (prefix == "right") return Action::Right;
  if (prefix == "left") return Action::Left;
  if (prefix == "down") return Action::Down;
  if (prefix == "fire") return Action::Fire;
  throw std::runtime_error("head predicate '" + std::string(head_name) +
                           "' does not start with an action name");
}

}  // namespace grail
