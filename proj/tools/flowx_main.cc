// flowx command-line driver.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/random.h"
#include "flowx/service.h"
#include "flowx/shapley.h"
#include "flowx/synth.h"

namespace {

using flowx::Error;
using flowx::ErrorKind;
namespace fs = std::filesystem;

constexpr const char* kFooter = R"(Outputs (fixed names under --out):
  gen-synth  trajectories.csv intersections.csv manifest.json scenario.conf
  ingest     flows.tpft ingest.json
  partition  partition.json
  train      model.tprm
  explain    attribution.json
  bench      bench.json
Exit codes: 0 ok, 1 other failure, 2 usage or configuration, 3 missing artifact, 4 data format.)";

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kMissingArtifact: return 3;
    case ErrorKind::kFormat: return 4;
    default: return 1;
  }
}

std::string OneLine(std::string s) {
  for (char& c : s) {
    if (c == '\n') c = ';';
    if (c == '"') c = '\'';
  }
  return s;
}

struct Shared {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
};

flowx::ServiceConfig LoadConfig(const Shared& shared) {
  flowx::ServiceConfig c =
      shared.config.empty() ? flowx::DefaultConfig() : flowx::LoadConfig(shared.config);
  if (shared.seed) c.seed = *shared.seed;
  return c;
}

fs::path OutDir(const Shared& shared, const flowx::ServiceConfig& config) {
  fs::path dir = shared.out.empty() ? config.artifacts : fs::path(shared.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kInput, "cannot create output directory", dir.string());
  return dir;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text << '\n';
  if (!out) throw Error(ErrorKind::kInput, "cannot write output file", path.string());
}

void RequireFile(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kMissingArtifact,
                fmt::format("missing {}; run `flowx {}` first", path.filename().string(), stage),
                path.string());
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int vehicles = 300;
  int hours = 6;
  int events = 1;
  int per_event = 8;
};

void RunGenSynth(const Shared& shared, const SynthArgs& a) {
  flowx::SynthParams p;
  p.vehicles = a.vehicles;
  p.hours = a.hours;
  p.congestion_events = a.events;
  p.vehicles_per_event = a.per_event;
  p.seed = shared.seed.value_or(42);
  const flowx::SynthScenario sc = flowx::GenerateSynth(p);
  const fs::path dir = shared.out.empty() ? fs::path("synth") : fs::path(shared.out);
  flowx::WriteSynthScenario(sc, dir);
  spdlog::info("wrote {} trajectories, {} intersections, {} planted events to {}",
               sc.trajectories.size(), sc.intersections.size(), sc.events.size(), dir.string());
}

void RunIngest(const Shared& shared) {
  const flowx::ServiceConfig config = LoadConfig(shared);
  if (config.trajectories.empty()) {
    throw Error(ErrorKind::kConfig, "trajectories path is not configured");
  }
  flowx::ParseStats parse;
  const flowx::TrajectoryStore store = flowx::LoadTrajectories(config.trajectories, &parse);
  flowx::IngestResult r = flowx::Ingest(config, store);
  r.parse = parse;
  const fs::path dir = OutDir(shared, config);
  r.tensor.Save(dir / flowx::kFlowsArtifact);
  const nlohmann::json report = {
      {"records", store.size()},
      {"lines", parse.lines},
      {"header_lines", parse.header_lines},
      {"malformed", parse.malformed},
      {"duplicate_points", parse.duplicate_points},
      {"t0", r.tensor.t0()},
      {"n_intervals", r.tensor.n_intervals()},
      {"interval_seconds", r.tensor.interval_seconds()},
      {"in_events", r.raster.in_events},
      {"out_events", r.raster.out_events},
      {"entries_from_outside", r.raster.entries_from_outside},
      {"exits_to_outside", r.raster.exits_to_outside},
      {"dropped_out_of_range", r.raster.dropped_out_of_range},
      {"outside_segments", r.raster.outside_segments},
  };
  WriteText(dir / "ingest.json", report.dump(2));
  spdlog::info("ingested {} records ({} malformed lines) into {}", store.size(), parse.malformed,
               (dir / flowx::kFlowsArtifact).string());
}

void RunPartition(const Shared& shared) {
  const flowx::ServiceConfig config = LoadConfig(shared);
  const flowx::GridSpec grid = flowx::ResolveGrid(config);
  const flowx::ClusterPartition p = flowx::PartitionStage(config, grid);
  const fs::path dir = OutDir(shared, config);
  flowx::SavePartition(p, grid, dir / flowx::kPartitionArtifact);
  spdlog::info("partitioned {} intersections into {} clusters (inertia {:.3f})", p.sites.size(),
               p.k, p.inertia);
}

void RunTrain(const Shared& shared) {
  const flowx::ServiceConfig config = LoadConfig(shared);
  const fs::path dir = OutDir(shared, config);
  RequireFile(dir / flowx::kFlowsArtifact, "ingest");
  RequireFile(dir / flowx::kPartitionArtifact, "partition");
  const flowx::GridSpec grid = flowx::ResolveGrid(config);
  const flowx::FlowTensor tensor = flowx::FlowTensor::Load(dir / flowx::kFlowsArtifact, grid);
  const flowx::ClusterPartition p = flowx::LoadPartition(dir / flowx::kPartitionArtifact);
  const auto predictor = flowx::TrainStage(config, tensor, p);
  flowx::SavePredictor(*predictor, dir / flowx::kModelArtifact);
  spdlog::info("trained {} predictor", flowx::PredictorKindName(predictor->kind()));
}

struct ExplainArgs {
  std::optional<int> cluster;
  std::string cell;
  int base = 0;
  std::optional<int> horizon;
};

void RunExplain(const Shared& shared, const ExplainArgs& a) {
  const flowx::ServiceConfig config = LoadConfig(shared);
  if (a.cluster.has_value() == !a.cell.empty()) {
    throw Error(ErrorKind::kConfig, "give exactly one of --cluster or --cell");
  }
  const fs::path artifacts = OutDir(shared, config);
  const auto scenario = flowx::Scenario::FromArtifacts(config, artifacts);
  const int h = a.horizon.value_or(config.interpreted_horizon);
  nlohmann::json doc;
  if (a.cluster) {
    doc = flowx::ClusterAttributionDocument(*scenario, *a.cluster, a.base, h);
  } else {
    int r = 0;
    int c = 0;
    char comma = 0;
    std::istringstream in(a.cell);
    if (!(in >> r >> comma >> c) || comma != ',' || !in.eof()) {
      throw Error(ErrorKind::kConfig, "--cell expects row,col", a.cell);
    }
    doc = flowx::GridAttributionDocument(*scenario, {r, c}, a.base, h);
  }
  WriteText(artifacts / "attribution.json", flowx::DumpJson(doc));
  spdlog::info("wrote {}", (artifacts / "attribution.json").string());
}

struct ServeArgs {
  std::optional<int> port;
  bool from_artifacts = false;
};

std::atomic<bool> g_stop{false};

void RunServe(const Shared& shared, const ServeArgs& a) {
  flowx::ServiceConfig config = LoadConfig(shared);
  if (a.port) config.port = *a.port;
  flowx::ApiHandler handler;
  flowx::HttpServer server(handler);
  const int port = server.Start(config.bind_address, config.port);
  std::cout << "listening on " << config.bind_address << ":" << port << std::endl;
  std::signal(SIGINT, [](int) { g_stop.store(true); });
  std::signal(SIGTERM, [](int) { g_stop.store(true); });
  std::thread init([&] {
    try {
      auto scenario = a.from_artifacts
                          ? flowx::Scenario::FromArtifacts(config, OutDir(shared, config))
                          : flowx::Scenario::Build(config);
      handler.Initialize(std::move(scenario));
      spdlog::info("scenario ready");
    } catch (const std::exception& e) {
      spdlog::error("initialization failed: {}", e.what());
      g_stop.store(true);
    }
  });
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  init.join();
  server.Stop();
  if (!handler.ready()) throw Error(ErrorKind::kState, "service failed to initialize");
}

struct BenchArgs {
  int games = 10;
  int players = 10;
  int permutations = 1000;
};

// Random game: a table of 2^p values when it fits, otherwise a random
// quadratic form over the membership vector.
flowx::CoalitionGame RandomGame(int players, uint64_t seed) {
  flowx::Rng rng(seed);
  flowx::CoalitionGame g;
  for (int i = 0; i < players; ++i) g.players.push_back(fmt::format("p{}", i));
  if (players <= flowx::kMaxExactPlayers) {
    auto table = std::make_shared<std::vector<double>>(size_t{1} << players);
    for (double& v : *table) v = rng.Uniform(-1.0, 1.0);
    g.value = [table, players](const flowx::Coalition& s) {
      size_t mask = 0;
      for (int i = 0; i < players; ++i) {
        if (s.contains(i)) mask |= size_t{1} << i;
      }
      return (*table)[mask];
    };
  } else {
    auto w = std::make_shared<std::vector<double>>(players * players);
    for (double& v : *w) v = rng.Uniform(-1.0, 1.0);
    g.value = [w, players](const flowx::Coalition& s) {
      double total = 0.0;
      for (int i = 0; i < players; ++i) {
        if (!s.contains(i)) continue;
        for (int j = i; j < players; ++j) {
          if (s.contains(j)) total += (*w)[i * players + j];
        }
      }
      return total;
    };
  }
  return g;
}

void RunBench(const Shared& shared, const BenchArgs& a) {
  if (a.games < 1 || a.players < 1 || a.permutations < 1) {
    throw Error(ErrorKind::kConfig, "--games, --players and --permutations must be >= 1");
  }
  const uint64_t seed = shared.seed.value_or(42);
  const bool exact = a.players <= flowx::kMaxExactPlayers;
  struct Totals {
    double seconds = 0.0;
    uint64_t counted = 0;
    uint64_t reported = 0;
    double stderr_sum = 0.0;
    double stderr_max = 0.0;
    size_t stderr_n = 0;
  } ex, mc;
  for (int gi = 0; gi < a.games; ++gi) {
    flowx::CoalitionGame game = RandomGame(a.players, flowx::MixSeed(seed, gi));
    auto counter = std::make_shared<std::atomic<uint64_t>>(0);
    auto inner = game.value;
    game.value = [inner, counter](const flowx::Coalition& s) {
      counter->fetch_add(1, std::memory_order_relaxed);
      return inner(s);
    };
    auto run = [&](Totals& t, auto&& fn) {
      counter->store(0);
      const auto start = std::chrono::steady_clock::now();
      const flowx::ShapleyResult r = fn();
      t.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      t.counted += counter->load();
      t.reported += r.evaluations;
      for (const flowx::Attribution& at : r.attributions) {
        t.stderr_sum += at.std_error;
        t.stderr_max = std::max(t.stderr_max, at.std_error);
        ++t.stderr_n;
      }
    };
    if (exact) run(ex, [&] { return flowx::ShapleyExact(game); });
    run(mc, [&] {
      return flowx::ShapleyMonteCarlo(game, a.permutations, flowx::MixSeed(seed, 1000 + gi));
    });
  }
  auto summary = [&](const Totals& t) {
    return nlohmann::json{
        {"wall_seconds", t.seconds},
        {"evaluations", t.reported},
        {"counted_calls", t.counted},
        {"evaluations_per_second", t.seconds > 0 ? t.reported / t.seconds : 0.0},
        {"stderr_mean", t.stderr_n ? t.stderr_sum / t.stderr_n : 0.0},
        {"stderr_max", t.stderr_max}};
  };
  nlohmann::json report = {{"games", a.games},
                           {"players", a.players},
                           {"permutations", a.permutations},
                           {"seed", seed},
                           {"monte_carlo", summary(mc)}};
  // Monte Carlo evaluates the empty coalition once per game on top of M*p.
  report["monte_carlo"]["baseline_evaluations"] = static_cast<uint64_t>(a.games);
  report["exact"] = exact ? summary(ex) : nlohmann::json(nullptr);
  std::cout << report.dump(2) << std::endl;
  if (!shared.out.empty()) {
    fs::create_directories(shared.out);
    WriteText(fs::path(shared.out) / "bench.json", report.dump(2));
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("flowx"));
  CLI::App app{"flowx: grid traffic-flow prediction with Shapley attributions"};
  app.footer(kFooter);
  app.require_subcommand(1);
  Shared shared;
  auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--config", shared.config, "key=value scenario config file");
    cmd->add_option("--seed", shared.seed, "seed for all randomness");
    cmd->add_option("--out", shared.out, "output directory");
  };

  SynthArgs synth;
  CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic scenario");
  add_shared(gen);
  gen->add_option("--vehicles", synth.vehicles, "background vehicles")->check(CLI::NonNegativeNumber);
  gen->add_option("--hours", synth.hours, "timeline length in hours")->check(CLI::NonNegativeNumber);
  gen->add_option("--congestion-events", synth.events, "planted converging-flow events")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--vehicles-per-event", synth.per_event, "trajectories per planted event")
      ->check(CLI::NonNegativeNumber);

  CLI::App* ingest = app.add_subcommand("ingest", "rasterize trajectories into flows.tpft");
  add_shared(ingest);
  CLI::App* part = app.add_subcommand("partition", "cluster intersections into partition.json");
  add_shared(part);
  CLI::App* train = app.add_subcommand("train", "fit the configured predictor into model.tprm");
  add_shared(train);

  ExplainArgs explain;
  CLI::App* exp = app.add_subcommand("explain", "attribute one prediction");
  add_shared(exp);
  exp->add_option("--cluster", explain.cluster, "cluster id");
  exp->add_option("--cell", explain.cell, "grid cell as row,col");
  exp->add_option("--base", explain.base, "base interval")->required();
  exp->add_option("--horizon", explain.horizon, "horizon in intervals (default: interpreted)");

  ServeArgs serve;
  CLI::App* srv = app.add_subcommand("serve", "run the HTTP API");
  add_shared(srv);
  srv->add_option("--port", serve.port, "listen port (overrides config)");
  srv->add_flag("--from-artifacts", serve.from_artifacts, "load stage artifacts instead of rebuilding");

  BenchArgs bench;
  CLI::App* bch = app.add_subcommand("bench", "time exact and Monte Carlo Shapley estimation");
  add_shared(bch);
  bch->add_option("--games", bench.games, "random games");
  bch->add_option("--players", bench.players, "players per game");
  bch->add_option("--permutations", bench.permutations, "Monte Carlo permutations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: kind=usage message=\"" << OneLine(e.what()) << "\"" << std::endl;
    return 2;
  }

  try {
    if (*gen) RunGenSynth(shared, synth);
    if (*ingest) RunIngest(shared);
    if (*part) RunPartition(shared);
    if (*train) RunTrain(shared);
    if (*exp) RunExplain(shared, explain);
    if (*srv) RunServe(shared, serve);
    if (*bch) RunBench(shared, bench);
  } catch (const Error& e) {
    std::cerr << "error: kind=" << flowx::ErrorKindName(e.kind()) << " message=\""
              << OneLine(e.what()) << "\"";
    if (!e.detail().empty()) std::cerr << " detail=\"" << OneLine(e.detail()) << "\"";
    std::cerr << std::endl;
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=\"" << OneLine(e.what()) << "\"" << std::endl;
    return 1;
  }
  return 0;
}
