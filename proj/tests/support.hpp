#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sstgnn/data.hpp"
#include "sstgnn/graph.hpp"
#include "sstgnn/model.hpp"

namespace sstgnn::testing {

inline SensorGraph random_graph(std::size_t n, double p, std::mt19937_64 &rng) {
	std::bernoulli_distribution coin(p);
	SensorGraph g(n);
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = i + 1; j < n; ++j) {
			if (coin(rng)) {
				g.add_edge(i, j);
			}
		}
	}
	return g;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64 &rng, double scale = 1.0) {
	Tensor t(std::move(shape));
	std::normal_distribution<double> gauss(0.0, scale);
	for (auto &v : t.values()) {
		v = gauss(rng);
	}
	return t;
}

/// The small configuration used for gradient checks.
inline ModelConfig tiny_config(BranchMode branches = BranchMode::both) {
	ModelConfig c;
	c.window = 3;
	c.max_hop = 2;
	c.history_days = 2;
	c.hidden_dim = 4;
	c.final_dim = 4;
	c.head_dim = 4;
	c.horizons = {1, 2};
	c.branches = branches;
	return c;
}

inline std::vector<SampleWindow> random_windows(const ModelConfig &c, std::size_t n, std::size_t count,
                                                std::mt19937_64 &rng) {
	std::vector<SampleWindow> out;
	for (std::size_t b = 0; b < count; ++b) {
		SampleWindow w;
		w.start = 3000 + 41 * b;
		w.current_x = random_tensor({n, c.window, 1}, rng);
		w.historical_x = random_tensor({n, c.window, c.history_days}, rng);
		w.target = random_tensor({n, c.n_out()}, rng);
		for (std::size_t t = 0; t < c.window; ++t) {
			w.time_indices.push_back(static_cast<std::int64_t>(w.start + t));
		}
		out.push_back(std::move(w));
	}
	return out;
}

/// Applies a node permutation (node i moves to perm[i]) to every per-node block of a batch.
inline Batch permute_batch(const Batch &batch, const std::vector<std::size_t> &perm) {
	auto permute_rows = [&](const Tensor &t) {
		Tensor out(t.shape());
		const std::size_t cols = t.cols();
		for (std::size_t b = 0; b < batch.size; ++b) {
			for (std::size_t u = 0; u < batch.n_nodes; ++u) {
				for (std::size_t c = 0; c < cols; ++c) {
					out(b * batch.n_nodes + perm[u], c) = t(b * batch.n_nodes + u, c);
				}
			}
		}
		return out;
	};
	Batch out = batch;
	for (auto &x : out.current) {
		x = permute_rows(x);
	}
	for (auto &x : out.historical) {
		x = permute_rows(x);
	}
	out.target = permute_rows(batch.target);
	return out;
}

inline Tensor permute_rows(const Tensor &t, std::size_t n_nodes, const std::vector<std::size_t> &perm) {
	Tensor out(t.shape());
	for (std::size_t r = 0; r < t.rows(); ++r) {
		const std::size_t b = r / n_nodes;
		const std::size_t u = r % n_nodes;
		for (std::size_t c = 0; c < t.cols(); ++c) {
			out(b * n_nodes + perm[u], c) = t(r, c);
		}
	}
	return out;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
	const auto dir = std::filesystem::temp_directory_path() / ("sstgnn_test_" + name);
	std::filesystem::remove_all(dir);
	std::filesystem::create_directories(dir);
	return dir;
}

} // namespace sstgnn::testing
