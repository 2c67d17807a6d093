#ifndef FLOWX_SHAPLEY_H_
#define FLOWX_SHAPLEY_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace flowx {

// Membership set over players 0..n-1.
class Coalition {
 public:
  explicit Coalition(size_t players) : players_(players), words_((players + 63) / 64, 0) {}
  static Coalition FromMask(size_t players, uint64_t mask);
  static Coalition Full(size_t players);

  size_t player_count() const { return players_; }
  bool contains(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void insert(size_t i) { words_[i >> 6] |= uint64_t{1} << (i & 63); }
  void erase(size_t i) { words_[i >> 6] &= ~(uint64_t{1} << (i & 63)); }
  size_t size() const;

 private:
  size_t players_;
  std::vector<uint64_t> words_;
};

// Transferable-utility game. `value` must be a pure function of the
// coalition; it may be called concurrently.
struct CoalitionGame {
  std::vector<std::string> players;
  std::function<double(const Coalition&)> value;
  size_t size() const { return players.size(); }
};

enum class AttributionMethod { kExact, kMonteCarlo };
std::string_view AttributionMethodName(AttributionMethod method);

struct Attribution {
  std::string player;
  double phi = 0.0;
  double std_error = 0.0;  // zero for exact attributions
  AttributionMethod method = AttributionMethod::kExact;
};

struct ShapleyResult {
  std::vector<Attribution> attributions;  // in player order
  double empty_value = 0.0;               // v(empty set)
  double full_value = 0.0;                // v(all players)
  // Value-function calls. For Monte Carlo the one call for the empty
  // coalition is reported separately in baseline_evaluations.
  uint64_t evaluations = 0;
  uint64_t baseline_evaluations = 0;
};

inline constexpr int kMaxExactPlayers = 20;

// Enumerates all 2^n coalitions once and weights marginal contributions by
// |S|!(n-|S|-1)!/n!. Throws kCapacity above kMaxExactPlayers players.
ShapleyResult ShapleyExact(const CoalitionGame& game, int threads = 0);

// Mean marginal contribution over `permutations` uniformly random player
// orders; std_error is the sample standard deviation over sqrt(M). Each
// permutation draws from its own stream derived from (seed, index), so the
// result does not depend on the thread count.
ShapleyResult ShapleyMonteCarlo(const CoalitionGame& game, int permutations, uint64_t seed,
                                int threads = 0);

}  // namespace flowx

#endif  // FLOWX_SHAPLEY_H_
