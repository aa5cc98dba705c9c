#include <benchmark/benchmark.h>

#include <random>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/data.hpp"
#include "sstgnn/graph.hpp"
#include "sstgnn/model.hpp"

using namespace sstgnn;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64 &rng) {
	std::normal_distribution<double> g;
	Tensor t({r, c});
	for (auto &v : t.values()) {
		v = g(rng);
	}
	return t;
}

SensorGraph corridor(std::size_t n, std::mt19937_64 &rng) {
	SensorGraph g(n);
	std::uniform_int_distribution<std::size_t> pick(0, n - 1);
	for (std::size_t i = 0; i + 1 < n; ++i) {
		g.add_edge(i, i + 1);
	}
	for (std::size_t e = 0; e < n / 4; ++e) {
		const auto a = pick(rng), b = pick(rng);
		if (a != b) {
			g.add_edge(a, b);
		}
	}
	return g;
}

} // namespace

static void BM_Matmul(benchmark::State &state) {
	const auto n = static_cast<std::size_t>(state.range(0));
	std::mt19937_64 rng(1);
	const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
	for (auto _ : state) {
		benchmark::DoNotOptimize(matmul(a, b));
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_KHop(benchmark::State &state) {
	const auto n = static_cast<std::size_t>(state.range(0));
	std::mt19937_64 rng(2);
	const SensorGraph g = corridor(n, rng);
	for (auto _ : state) {
		benchmark::DoNotOptimize(khop_neighborhoods(g, 4));
	}
}
BENCHMARK(BM_KHop)->Arg(228)->Arg(307);

static void BM_SparseMix(benchmark::State &state) {
	std::mt19937_64 rng(3);
	const SensorGraph g = corridor(228, rng);
	const auto hops = khop_neighborhoods(g, 2);
	const Tensor x = random_matrix(32 * 228, 64, rng);
	for (auto _ : state) {
		benchmark::DoNotOptimize(block_spmm(hops.aggregator(2), x));
	}
}
BENCHMARK(BM_SparseMix);

static void BM_ForwardBackward(benchmark::State &state) {
	const auto n = static_cast<std::size_t>(state.range(0));
	SynthConfig sc;
	sc.n_nodes = n;
	sc.n_days = 9;
	const auto ds = synthesize(sc);
	ModelConfig mc;
	mc.hidden_dim = 16;
	mc.final_dim = 32;
	mc.head_dim = 32;
	const auto spec = mc.window_spec();
	const auto hops = khop_neighborhoods(build_adjacency(ds.distances, n, 0.1, 0.5), mc.max_hop);
	std::vector<SampleWindow> windows;
	for (std::size_t b = 0; b < 8; ++b) {
		windows.push_back(make_window(ds.series, spec, first_window_start(spec, 288) + 50 * b));
	}
	const Batch batch = make_batch(windows);
	SstGnn model(mc);
	model.initialize(1);
	const PositionalEncoder enc;
	for (auto _ : state) {
		Tape tape;
		tape.backward(mse(model.forward(tape, batch, hops, enc), batch.target));
		model.params().zero_grads();
	}
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
