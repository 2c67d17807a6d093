#include "flowx/shapley.h"

#include <bit>
#include <cmath>
#include <numeric>

#include "flowx/error.h"
#include "flowx/parallel.h"
#include "flowx/random.h"

namespace flowx {
namespace {

constexpr int kPermutationsPerChunk = 16;

// Per-player running mean and squared deviation (Welford), mergeable in a
// fixed order.
struct Moments {
  std::vector<double> mean;
  std::vector<double> m2;
  int64_t count = 0;

  explicit Moments(size_t n) : mean(n, 0.0), m2(n, 0.0) {}

  void Add(const std::vector<double>& x) {
    ++count;
    for (size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta / static_cast<double>(count);
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  void Merge(const Moments& o) {
    if (o.count == 0) return;
    const double n1 = static_cast<double>(count);
    const double n2 = static_cast<double>(o.count);
    const double n = n1 + n2;
    for (size_t i = 0; i < mean.size(); ++i) {
      const double delta = o.mean[i] - mean[i];
      mean[i] += delta * n2 / n;
      m2[i] += o.m2[i] + delta * delta * n1 * n2 / n;
    }
    count += o.count;
  }
};

}  // namespace

Coalition Coalition::FromMask(size_t players, uint64_t mask) {
  Coalition c(players);
  if (!c.words_.empty()) c.words_[0] = players >= 64 ? mask : mask & ((uint64_t{1} << players) - 1);
  return c;
}

Coalition Coalition::Full(size_t players) {
  Coalition c(players);
  for (size_t i = 0; i < players; ++i) c.insert(i);
  return c;
}

size_t Coalition::size() const {
  size_t n = 0;
  for (uint64_t w : words_) n += static_cast<size_t>(std::popcount(w));
  return n;
}

std::string_view AttributionMethodName(AttributionMethod method) {
  return method == AttributionMethod::kExact ? "exact" : "monte_carlo";
}

ShapleyResult ShapleyExact(const CoalitionGame& game, int threads) {
  const size_t n = game.size();
  if (n > static_cast<size_t>(kMaxExactPlayers)) {
    throw Error(ErrorKind::kCapacity,
                "exact Shapley enumeration supports at most " +
                    std::to_string(kMaxExactPlayers) + " players; use Monte Carlo sampling",
                "players=" + std::to_string(n));
  }
  const uint64_t subsets = uint64_t{1} << n;
  std::vector<double> values(subsets);
  constexpr uint64_t kBlock = 1024;
  const uint64_t blocks = (subsets + kBlock - 1) / kBlock;
  ParallelFor(
      blocks,
      [&](size_t b) {
        const uint64_t end = std::min<uint64_t>(subsets, (b + 1) * kBlock);
        for (uint64_t mask = b * kBlock; mask < end; ++mask) {
          values[mask] = game.value(Coalition::FromMask(n, mask));
        }
      },
      threads);

  // weight[s] = s! (n-s-1)! / n!
  std::vector<double> weight(n, 0.0);
  if (n > 0) {
    weight[0] = 1.0 / static_cast<double>(n);
    for (size_t s = 0; s + 1 < n; ++s) {
      weight[s + 1] = weight[s] * static_cast<double>(s + 1) / static_cast<double>(n - s - 1);
    }
  }

  ShapleyResult result;
  result.attributions.resize(n);
  ParallelFor(
      n,
      [&](size_t i) {
        const uint64_t bit = uint64_t{1} << i;
        double phi = 0.0;
        for (uint64_t mask = 0; mask < subsets; ++mask) {
          if (mask & bit) continue;
          phi += weight[std::popcount(mask)] * (values[mask | bit] - values[mask]);
        }
        result.attributions[i] = {game.players[i], phi, 0.0, AttributionMethod::kExact};
      },
      threads);
  result.empty_value = values.front();
  result.full_value = values.back();
  result.evaluations = subsets;
  return result;
}

ShapleyResult ShapleyMonteCarlo(const CoalitionGame& game, int permutations, uint64_t seed,
                                int threads) {
  if (permutations < 1) throw Error(ErrorKind::kConfig, "Monte Carlo needs >= 1 permutation");
  const size_t n = game.size();
  ShapleyResult result;
  result.empty_value = game.value(Coalition(n));
  result.baseline_evaluations = 1;
  if (n == 0) {
    result.full_value = result.empty_value;
    return result;
  }

  const size_t chunks = (static_cast<size_t>(permutations) + kPermutationsPerChunk - 1) /
                        kPermutationsPerChunk;
  std::vector<Moments> partial(chunks, Moments(n));
  std::vector<double> full_values(chunks, 0.0);
  ParallelFor(
      chunks,
      [&](size_t chunk) {
        std::vector<size_t> order(n);
        std::vector<double> marginal(n);
        const size_t first = chunk * kPermutationsPerChunk;
        const size_t last = std::min<size_t>(permutations, first + kPermutationsPerChunk);
        for (size_t p = first; p < last; ++p) {
          Rng rng(MixSeed(seed, p));
          std::iota(order.begin(), order.end(), size_t{0});
          for (size_t i = n - 1; i > 0; --i) {
            std::swap(order[i], order[rng.UniformIndex(i + 1)]);
          }
          Coalition coalition(n);
          double prev = result.empty_value;
          for (size_t player : order) {
            coalition.insert(player);
            const double v = game.value(coalition);
            marginal[player] = v - prev;
            prev = v;
          }
          full_values[chunk] = prev;
          partial[chunk].Add(marginal);
        }
      },
      threads);

  Moments total(n);
  for (const Moments& m : partial) total.Merge(m);
  result.full_value = full_values.front();
  result.evaluations = static_cast<uint64_t>(permutations) * n;
  result.attributions.resize(n);
  const double m = static_cast<double>(permutations);
  for (size_t i = 0; i < n; ++i) {
    const double sd = permutations > 1 ? std::sqrt(total.m2[i] / (m - 1.0)) : 0.0;
    result.attributions[i] = {game.players[i], total.mean[i], sd / std::sqrt(m),
                              AttributionMethod::kMonteCarlo};
  }
  return result;
}

}  // namespace flowx
