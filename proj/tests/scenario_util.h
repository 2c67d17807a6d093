#ifndef FLOWX_TESTS_SCENARIO_UTIL_H_
#define FLOWX_TESTS_SCENARIO_UTIL_H_

#include <filesystem>
#include <string>

#include "flowx/synth.h"
#include "test_util.h"

namespace flowx::testing {

// Writes a synthetic scenario into a fresh temp dir and returns the dir; the
// config is at dir / "scenario.conf".
inline std::filesystem::path WriteScenario(const std::string& name, const SynthParams& params) {
  const auto dir = TempDir(name);
  WriteSynthScenario(GenerateSynth(params), dir);
  return dir;
}

inline SynthParams SmallScenarioParams(uint64_t seed = 7) {
  SynthParams p;
  p.vehicles = 150;
  p.hours = 4;
  p.seed = seed;
  return p;
}

}  // namespace flowx::testing

#endif  // FLOWX_TESTS_SCENARIO_UTIL_H_
