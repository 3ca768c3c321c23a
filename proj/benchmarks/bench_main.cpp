#include <benchmark/benchmark.h>

#include <cstdlib>
#include <random>
#include <string>

#include "marlta/env.hpp"
#include "marlta/equilibrium.hpp"
#include "marlta/loading.hpp"
#include "marlta/mlp.hpp"
#include "marlta/policy.hpp"
#include "marlta/shortest_paths.hpp"
#include "marlta/tntp.hpp"

using namespace marlta;

namespace {

std::string fixture(const std::string& suffix) {
  const char* env = std::getenv("MARLTA_DATA_DIR");
  const std::string root = env ? env : MARLTA_BENCH_DATA_DIR;
  return root + "/SiouxFalls/SiouxFalls_" + suffix;
}

struct Sioux {
  Network net = load_network_file(fixture("net.tntp"));
  DemandMatrix dm = load_trips_file(fixture("trips.tntp"), &net).demand;
  NodeCoords coords = load_node_file(fixture("node.tntp"));
  RouteSet rs = build_route_sets(net, dm);
};

const Sioux& sioux() {
  static const Sioux s;
  return s;
}

void BM_ParseFixture(benchmark::State& state) {
  for (auto _ : state) {
    Network net = load_network_file(fixture("net.tntp"));
    benchmark::DoNotOptimize(load_trips_file(fixture("trips.tntp"), &net));
  }
}
BENCHMARK(BM_ParseFixture);

void BM_ShortestPathTree(benchmark::State& state) {
  const Network& net = sioux().net;
  const auto costs = net.free_flow_times();
  int origin = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(shortest_path_tree(net, costs, origin));
    origin = (origin + 1) % net.node_count();
  }
}
BENCHMARK(BM_ShortestPathTree);

void BM_BuildRouteSets(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_route_sets(sioux().net, sioux().dm));
}
BENCHMARK(BM_BuildRouteSets)->Unit(benchmark::kMillisecond);

void BM_LoadNetwork(benchmark::State& state) {
  const JointAction act = uniform_action(sioux().rs);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        load_network(sioux().net, sioux().rs, sioux().dm, act, CostMode::kUserEquilibrium));
  }
}
BENCHMARK(BM_LoadNetwork)->Unit(benchmark::kMicrosecond);

void BM_FrankWolfe(benchmark::State& state) {
  SolverOptions opt;
  opt.max_iters = static_cast<int>(state.range(0));
  opt.record_time = false;
  for (auto _ : state) benchmark::DoNotOptimize(solve_fw(sioux().net, sioux().dm, opt));
}
BENCHMARK(BM_FrankWolfe)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EnvironmentStep(benchmark::State& state) {
  const Environment env(sioux().net, sioux().rs, sioux().dm, &sioux().coords, EnvConfig{});
  const JointAction act = uniform_action(sioux().rs);
  std::mt19937_64 rng(0);
  EnvState st = env.reset(rng);
  for (auto _ : state) {
    if (st.t == env.config().steps_per_episode) st = env.reset(rng);
    benchmark::DoNotOptimize(env.step(st, act));
    benchmark::DoNotOptimize(env.observe_all(st));
  }
}
BENCHMARK(BM_EnvironmentStep)->Unit(benchmark::kMicrosecond);

void BM_MlpForward(benchmark::State& state) {
  std::mt19937_64 rng(0);
  Mlp m(MlpArch{kObsDim, std::vector<int>(3, static_cast<int>(state.range(0))), kMaxRoutes});
  m.init_orthogonal(rng, 0.01);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kObsDim, 528);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
