#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/errors.hpp"
#include "sstgnn/gradcheck.hpp"
#include "sstgnn/model.hpp"
#include "support.hpp"

using namespace sstgnn;
using namespace sstgnn::testing;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor &t) {
	Mat m(t.rows(), std::vector<double>(t.cols()));
	for (std::size_t i = 0; i < t.rows(); ++i) {
		for (std::size_t j = 0; j < t.cols(); ++j) {
			m[i][j] = t(i, j);
		}
	}
	return m;
}

Mat mul(const Mat &a, const Mat &b) {
	Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
	for (std::size_t i = 0; i < a.size(); ++i) {
		for (std::size_t k = 0; k < b.size(); ++k) {
			for (std::size_t j = 0; j < b[0].size(); ++j) {
				c[i][j] += a[i][k] * b[k][j];
			}
		}
	}
	return c;
}

// Straight-line forward for one window, written from the model equations
// with dense matrices and no tape.
Mat reference_forward(const SstGnn &model, const SampleWindow &w, const SensorGraph &graph,
                      const PositionalEncoder &enc) {
	const ModelConfig &c = model.config();
	const auto &P = model.params();
	auto W = [&](const std::string &id) { return to_mat(P[P.index_of(id)].value); };
	const std::size_t n = w.current_x.dim(0);
	const auto dist = [&] {
		std::vector<std::vector<int>> d;
		for (std::size_t u = 0; u < n; ++u) {
			d.push_back(bfs_hops(graph, u));
		}
		return d;
	}();

	auto branch = [&](const std::string &prefix, std::size_t d_in, bool hist) {
		std::vector<Mat> z;
		for (std::size_t t = 0; t < c.window; ++t) {
			Mat x(n, std::vector<double>(d_in));
			for (std::size_t u = 0; u < n; ++u) {
				for (std::size_t j = 0; j < d_in; ++j) {
					x[u][j] = hist ? w.historical_x.at(u, t, j) : w.current_x.at(u, t, 0);
				}
			}
			const std::string ts = c.share_weights ? "" : ".t" + std::to_string(t + 1);
			Mat s(n, std::vector<double>(c.hidden_dim, 0.0));
			for (std::size_t k = 1; k <= c.max_hop; ++k) {
				Mat mean(n, std::vector<double>(d_in, 0.0));
				for (std::size_t u = 0; u < n; ++u) {
					double cnt = 0.0;
					for (std::size_t v = 0; v < n; ++v) {
						if (dist[u][v] == static_cast<int>(k)) {
							cnt += 1.0;
							for (std::size_t j = 0; j < d_in; ++j) {
								mean[u][j] += x[v][j];
							}
						}
					}
					for (std::size_t j = 0; j < d_in && cnt > 0; ++j) {
						mean[u][j] /= cnt;
					}
				}
				const Mat term = mul(mean, W(prefix + ".spatial" + ts + ".k" + std::to_string(k)));
				for (std::size_t u = 0; u < n; ++u) {
					for (std::size_t j = 0; j < c.hidden_dim; ++j) {
						s[u][j] += term[u][j];
					}
				}
			}
			Mat zt(n, std::vector<double>(c.hidden_dim, 0.0));
			for (std::size_t i = 0; i < t; ++i) {
				const Mat term = mul(z[i], W(prefix + ".temporal.i" + std::to_string(i + 1)));
				for (std::size_t u = 0; u < n; ++u) {
					for (std::size_t j = 0; j < c.hidden_dim; ++j) {
						zt[u][j] += term[u][j];
					}
				}
			}
			Mat cat(n);
			for (std::size_t u = 0; u < n; ++u) {
				for (auto &v : zt[u]) {
					v = std::max(v, 0.0);
				}
				cat[u] = x[u];
				cat[u].insert(cat[u].end(), s[u].begin(), s[u].end());
				cat[u].insert(cat[u].end(), zt[u].begin(), zt[u].end());
			}
			Mat out = mul(cat, W(prefix + ".combine" + ts));
			const double pe = enc.encode(w.time_indices[t]);
			for (auto &row : out) {
				for (auto &v : row) {
					v = std::max(v, 0.0) + pe;
				}
			}
			z.push_back(out);
		}
		return z;
	};

	std::vector<Mat> all;
	if (c.uses_historical()) {
		for (auto &m : branch("hist", c.history_days, true)) {
			all.push_back(m);
		}
	}
	if (c.uses_current()) {
		for (auto &m : branch("cur", 1, false)) {
			all.push_back(m);
		}
	}
	Mat zcat(n);
	for (std::size_t u = 0; u < n; ++u) {
		for (const auto &m : all) {
			zcat[u].insert(zcat[u].end(), m[u].begin(), m[u].end());
		}
	}
	Mat h = mul(mul(zcat, W("head.final")), W("head.w1"));
	const Mat b1 = W("head.b1"), b2 = W("head.b2");
	for (auto &row : h) {
		for (std::size_t j = 0; j < row.size(); ++j) {
			row[j] = std::max(row[j] + b1[0][j], 0.0);
		}
	}
	Mat y = mul(h, W("head.w2"));
	for (auto &row : y) {
		for (std::size_t j = 0; j < row.size(); ++j) {
			row[j] += b2[0][j];
		}
	}
	return y;
}

struct Fixture {
	ModelConfig config;
	std::size_t n;
	SensorGraph graph;
	HopNeighborhoods hops;
	std::vector<SampleWindow> windows;
	Batch batch;
	SstGnn model;

	Fixture(ModelConfig c, std::size_t nodes, std::size_t batch_size, std::uint64_t seed)
	    : config(c), n(nodes), graph(nodes), model(c) {
		std::mt19937_64 rng(seed);
		graph = random_graph(n, 0.3, rng);
		hops = khop_neighborhoods(graph, config.max_hop);
		windows = random_windows(config, n, batch_size, rng);
		batch = make_batch(windows);
		model.initialize(seed);
	}
};

} // namespace

TEST(Model, ParameterShapes) {
	ModelConfig c = tiny_config();
	SstGnn both(c);
	const auto &p = both.params();
	EXPECT_EQ(p[p.index_of("head.final")].value.shape(), (Shape{2 * 3 * 4, 4}));
	EXPECT_EQ(p[p.index_of("hist.spatial.t1.k2")].value.shape(), (Shape{2, 4}));
	EXPECT_EQ(p[p.index_of("cur.combine.t3")].value.shape(), (Shape{1 + 8, 4}));
	EXPECT_EQ(p[p.index_of("cur.temporal.i2")].value.shape(), (Shape{4, 4}));
	EXPECT_FALSE(p.contains("cur.temporal.i3"));
	c.branches = BranchMode::current;
	SstGnn cur(c);
	EXPECT_EQ(cur.params()[cur.params().index_of("head.final")].value.rows(), 3u * 4u);
	c.share_weights = true;
	SstGnn shared(c);
	EXPECT_TRUE(shared.params().contains("cur.spatial.k1"));
	EXPECT_FALSE(shared.params().contains("cur.spatial.t2.k1"));
}

TEST(Model, InvalidConfigRejected) {
	ModelConfig c = tiny_config();
	c.hidden_dim = 0;
	EXPECT_THROW(SstGnn{c}, ConfigError);
	c = tiny_config();
	c.horizons.clear();
	EXPECT_THROW(SstGnn{c}, ConfigError);
	c = tiny_config();
	c.history_days = 0;
	EXPECT_THROW(SstGnn{c}, ConfigError);
	c.branches = BranchMode::current;
	EXPECT_NO_THROW(SstGnn{c});
	EXPECT_THROW(parse_branch_mode("sideways"), ConfigError);
}

TEST(Model, InitializationIsSeededAndBounded) {
	SstGnn a(tiny_config()), b(tiny_config());
	a.initialize(5);
	b.initialize(5);
	for (std::size_t i = 0; i < a.params().size(); ++i) {
		const auto &p = a.params()[i];
		EXPECT_EQ(p.value, b.params()[i].value);
		const double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
		for (double v : p.value.values()) {
			if (p.id.ends_with(".b1") || p.id.ends_with(".b2")) {
				EXPECT_EQ(v, 0.0);
			} else {
				EXPECT_LE(std::abs(v), bound);
			}
		}
	}
}

TEST(Model, ForwardMatchesLoopReference) {
	for (auto mode : {BranchMode::both, BranchMode::current, BranchMode::historical}) {
		for (bool shared : {false, true}) {
			ModelConfig c = tiny_config(mode);
			c.share_weights = shared;
			Fixture f(c, 7, 3, 21);
			const PositionalEncoder enc;
			const Tensor y = f.model.predict(f.batch, f.hops, enc);
			ASSERT_EQ(y.shape(), (Shape{3 * 7, 2}));
			for (std::size_t b = 0; b < 3; ++b) {
				const Mat ref = reference_forward(f.model, f.windows[b], f.graph, enc);
				for (std::size_t u = 0; u < 7; ++u) {
					for (std::size_t j = 0; j < 2; ++j) {
						EXPECT_NEAR(y(b * 7 + u, j), ref[u][j], 1e-12) << to_string(mode) << " shared " << shared;
					}
				}
			}
		}
	}
}

TEST(Model, GradientsMatchFiniteDifferences) {
	for (auto mode : {BranchMode::both, BranchMode::current, BranchMode::historical}) {
		for (bool shared : {false, true}) {
			ModelConfig c = tiny_config(mode);
			c.share_weights = shared;
			Fixture f(c, 6, 2, 33);
			const PositionalEncoder enc;
			auto loss = [&] {
				Tape tape;
				return mse(f.model.forward(tape, f.batch, f.hops, enc), f.batch.target).value()[0];
			};
			auto backward = [&] {
				Tape tape;
				tape.backward(mse(f.model.forward(tape, f.batch, f.hops, enc), f.batch.target));
			};
			const auto r = check_gradients(f.model.params(), loss, backward);
			EXPECT_TRUE(r.passed()) << to_string(mode) << " shared " << shared << ": " << r.worst_param << " "
			                        << r.max_rel_error;
		}
	}
}

TEST(Model, EmbeddingsAreCausalInTime) {
	ModelConfig c = tiny_config();
	c.window = 5;
	Fixture f(c, 6, 1, 8);
	const PositionalEncoder enc;
	EmbeddingTrace before, after;
	f.model.predict(f.batch, f.hops, enc, &before);
	Batch changed = f.batch;
	const std::size_t t_star = 2;
	for (std::size_t r = 0; r < changed.rows(); ++r) {
		changed.current[t_star](r, 0) += 5.0;
	}
	f.model.predict(changed, f.hops, enc, &after);
	for (std::size_t t = 0; t < c.window; ++t) {
		if (t < t_star) {
			EXPECT_EQ(before.current[t], after.current[t]) << t;
		}
		EXPECT_EQ(before.historical[t], after.historical[t]);
	}
	EXPECT_NE(before.current[t_star], after.current[t_star]);
}

TEST(Model, PermutationEquivariance) {
	ModelConfig c = tiny_config();
	Fixture f(c, 8, 2, 44);
	const PositionalEncoder enc;
	const Tensor y = f.model.predict(f.batch, f.hops, enc);
	std::mt19937_64 rng(45);
	std::vector<std::size_t> perm(8);
	std::iota(perm.begin(), perm.end(), 0);
	for (int trial = 0; trial < 5; ++trial) {
		std::shuffle(perm.begin(), perm.end(), rng);
		const auto hp = khop_neighborhoods(f.graph.permuted(perm), c.max_hop);
		const Tensor yp = f.model.predict(permute_batch(f.batch, perm), hp, enc);
		EXPECT_LT(max_abs_diff(yp, permute_rows(y, 8, perm)), 1e-9);
	}
}

TEST(Model, DisabledBranchIsIsolated) {
	for (auto mode : {BranchMode::current, BranchMode::historical}) {
		Fixture f(tiny_config(mode), 6, 2, 51);
		const PositionalEncoder enc;
		Batch other = f.batch;
		auto &perturbed = mode == BranchMode::current ? other.historical : other.current;
		for (auto &x : perturbed) {
			for (auto &v : x.values()) {
				v += 3.0;
			}
		}
		EXPECT_EQ(f.model.predict(f.batch, f.hops, enc), f.model.predict(other, f.hops, enc));

		Tape tape;
		tape.backward(mse(f.model.forward(tape, f.batch, f.hops, enc), f.batch.target));
		const auto off = mode == BranchMode::current ? BranchMode::historical : BranchMode::current;
		ASSERT_FALSE(f.model.branch_parameter_indices(off).empty());
		for (auto i : f.model.branch_parameter_indices(off)) {
			for (double g : f.model.params()[i].grad.values()) {
				EXPECT_EQ(g, 0.0) << f.model.params()[i].id;
			}
		}
		double on_norm = 0.0;
		for (auto i : f.model.branch_parameter_indices(mode)) {
			for (double g : f.model.params()[i].grad.values()) {
				on_norm += g * g;
			}
		}
		EXPECT_GT(on_norm, 0.0);
	}
}

TEST(Model, PositionalEncodingUsesWindowTimestamps) {
	Fixture f(tiny_config(), 5, 1, 60);
	const PositionalEncoder enc;
	const auto pe = positional_rows(f.batch, enc);
	ASSERT_EQ(pe.size(), 3u);
	for (std::size_t t = 0; t < 3; ++t) {
		for (double v : pe[t]) {
			EXPECT_EQ(v, enc.encode(f.windows[0].time_indices[t]));
		}
	}
}

TEST(Model, MismatchedInputsRejected) {
	Fixture f(tiny_config(), 5, 1, 70);
	const PositionalEncoder enc;
	const auto wrong_hops = khop_neighborhoods(SensorGraph(6), 2);
	EXPECT_THROW(f.model.predict(f.batch, wrong_hops, enc), DimensionError);
	SstGnn other(tiny_config(BranchMode::current));
	EXPECT_THROW(f.model.load_values(other.params()), DimensionError);
}

TEST(Model, BatchStacksWindowsByNode) {
	std::mt19937_64 rng(80);
	const auto ws = random_windows(tiny_config(), 4, 3, rng);
	const Batch b = make_batch(ws);
	EXPECT_EQ(b.rows(), 12u);
	EXPECT_EQ(b.current[1](2 * 4 + 3, 0), ws[2].current_x.at(3, 1, 0));
	EXPECT_EQ(b.historical[2](4 + 1, 1), ws[1].historical_x.at(1, 2, 1));
	EXPECT_EQ(b.target(2 * 4, 1), ws[2].target(0, 1));
}
