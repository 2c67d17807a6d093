#ifndef FLOWX_TESTS_GAME_UTIL_H_
#define FLOWX_TESTS_GAME_UTIL_H_

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "flowx/random.h"
#include "flowx/shapley.h"

namespace flowx::testing {

inline uint64_t MaskOf(const Coalition& s) {
  uint64_t m = 0;
  for (size_t i = 0; i < s.player_count(); ++i) {
    if (s.contains(i)) m |= uint64_t{1} << i;
  }
  return m;
}

inline std::vector<std::string> PlayerNames(size_t n) {
  std::vector<std::string> names;
  for (size_t i = 0; i < n; ++i) names.push_back("p" + std::to_string(i));
  return names;
}

// Game backed by an explicit value table indexed by coalition bitmask.
inline CoalitionGame TableGame(std::vector<double> table, size_t n) {
  auto t = std::make_shared<std::vector<double>>(std::move(table));
  return CoalitionGame{PlayerNames(n), [t](const Coalition& s) { return (*t)[MaskOf(s)]; }};
}

inline std::vector<double> RandomTable(size_t n, Rng& rng) {
  std::vector<double> t(size_t{1} << n);
  for (double& v : t) v = rng.Uniform(-10.0, 10.0);
  return t;
}

// Table where players a and b are interchangeable and player d is a null
// player.
inline std::vector<double> StructuredTable(size_t n, size_t a, size_t b, size_t d, Rng& rng) {
  std::vector<double> t(size_t{1} << n, 0.0);
  const uint64_t bit_a = uint64_t{1} << a, bit_b = uint64_t{1} << b, bit_d = uint64_t{1} << d;
  for (uint64_t m = 0; m < t.size(); ++m) {
    if (m & bit_d) continue;
    uint64_t swapped = m & ~(bit_a | bit_b);
    if (m & bit_a) swapped |= bit_b;
    if (m & bit_b) swapped |= bit_a;
    if (swapped < m) {
      t[m] = t[swapped];
    } else {
      t[m] = rng.Uniform(-10.0, 10.0);
    }
  }
  for (uint64_t m = 0; m < t.size(); ++m) {
    if (m & bit_d) t[m] = t[m & ~bit_d];
  }
  return t;
}

// Brute-force oracle: averages marginal contributions over all n! orders.
inline std::vector<double> PermutationOracle(const std::vector<double>& table, size_t n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    uint64_t mask = 0;
    for (int p : order) {
      const uint64_t next = mask | (uint64_t{1} << p);
      phi[p] += table[next] - table[mask];
      mask = next;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= count;
  return phi;
}

}  // namespace flowx::testing

#endif  // FLOWX_TESTS_GAME_UTIL_H_
