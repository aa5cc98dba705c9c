#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/data.hpp"
#include "sstgnn/encoding.hpp"
#include "sstgnn/graph.hpp"

namespace sstgnn {

enum class BranchMode { historical, current, both };

std::string to_string(BranchMode mode);
BranchMode parse_branch_mode(const std::string &s);

struct ModelConfig {
	std::size_t window = 12;      // T, timestamps per input window
	std::size_t max_hop = 2;      // K
	std::size_t history_days = 7; // P, input width of the historical branch
	std::size_t hidden_dim = 64;  // width of every per-timestamp embedding
	std::size_t final_dim = 128;  // width of the combined node embedding
	std::size_t head_dim = 128;   // hidden width of the prediction head
	/// Predicted steps ahead; one output column each.
	std::vector<std::size_t> horizons{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
	BranchMode branches = BranchMode::both;
	/// Tie spatial and combination weights across timestamps.
	bool share_weights = false;

	std::size_t n_out() const noexcept { return horizons.size(); }
	bool uses_historical() const noexcept { return branches != BranchMode::current; }
	bool uses_current() const noexcept { return branches != BranchMode::historical; }
	std::size_t enabled_branches() const noexcept { return branches == BranchMode::both ? 2 : 1; }

	/// Throws ConfigError on zero widths, empty horizons, or P = 0 with the historical branch enabled.
	void validate() const;
	WindowSpec window_spec(std::size_t stride = 1) const;

	friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Stacked inputs for a minibatch: row b*n + u holds node u of window b.
struct Batch {
	std::size_t n_nodes = 0;
	std::size_t size = 0;
	std::vector<Tensor> current;    // per timestamp, [B*n x 1]
	std::vector<Tensor> historical; // per timestamp, [B*n x P]
	std::vector<std::vector<std::int64_t>> time_indices; // [B][T]
	Tensor target;                  // [B*n x n_out]
	std::vector<std::size_t> starts;

	std::size_t rows() const noexcept { return n_nodes * size; }
};

Batch make_batch(std::span<const SampleWindow> windows);

/// Per-timestamp positional offsets for every stacked row.
std::vector<std::vector<double>> positional_rows(const Batch &batch, const PositionalEncoder &encoder);

/// Tape handles for one branch's weights.
struct BranchVars {
	std::vector<std::vector<Var>> spatial; // [t][k-1], each [d_in x d_h]
	std::vector<Var> temporal;             // [i], i = 0..T-2, each [d_h x d_h]
	std::vector<Var> combine;              // [t], each [(d_in + 2 d_h) x d_h]
};

struct HeadVars {
	Var final_proj; // [(branches*T*d_h) x d_f]
	Var w1, b1;     // [d_f x d_head], [1 x d_head]
	Var w2, b2;     // [d_head x n_out], [1 x n_out]
};

/// S_t = sum_k (D_k^-1 A_k X_t) W_k; no nonlinearity.
Var spatial_aggregate(Var x_t, const HopNeighborhoods &hops, std::span<const Var> hop_weights);

/// ReLU(sum_{i<t} Z_i W_i); the zero tensor [rows x hidden] when `prior` is empty.
Var temporal_aggregate(Tape &tape, std::span<const Var> prior, std::span<const Var> weights, std::size_t rows,
                       std::size_t hidden);

/// ReLU((X_t | S_t | Ztilde_t) W_combine) + pe, with pe broadcast across each row.
Var st_embed(Var x_t, Var spatial, Var temporal, Var w_combine, std::vector<double> pe_rows);

/// Runs one branch over T timestamps. Temporal sums are built
/// incrementally, so Z_t depends only on inputs at timestamps <= t.
std::vector<Var> branch_forward(Tape &tape, std::span<const Tensor> features, std::span<const std::vector<double>> pe,
                                const HopNeighborhoods &hops, const BranchVars &vars);

/// Concatenates all branch embeddings per node, projects with W_F and
/// applies the two-layer head: ReLU(Z_F W1 + b1) W2 + b2.
Var final_embed_and_predict(std::span<const Var> historical, std::span<const Var> current, const HeadVars &head,
                            Var *final_embedding = nullptr);

/// Values captured during a forward pass.
struct EmbeddingTrace {
	std::vector<Tensor> historical; // Z_H^t
	std::vector<Tensor> current;    // Z_C^t
	Tensor concatenated;            // Z~_F
	Tensor final_embedding;         // Z_F
	Tensor predictions;
};

/// The two-branch spatio-temporal forecaster.
class SstGnn {
public:
	explicit SstGnn(ModelConfig config);

	const ModelConfig &config() const noexcept { return config_; }
	ParameterSet &params() noexcept { return params_; }
	const ParameterSet &params() const noexcept { return params_; }

	/// Scaled-uniform init, bound sqrt(6 / (fan_in + fan_out)); biases start at 0.
	void initialize(std::uint64_t seed);

	/// Records the forward pass; returns predictions [B*n x n_out] in normalized units.
	Var forward(Tape &tape, const Batch &batch, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
	            EmbeddingTrace *trace = nullptr);
	Tensor predict(const Batch &batch, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
	               EmbeddingTrace *trace = nullptr);

	/// Ids of the parameters owned by one branch ("hist." / "cur." prefix).
	std::vector<std::size_t> branch_parameter_indices(BranchMode branch) const;

	/// Replaces all parameter values; ids and shapes must match.
	void load_values(const ParameterSet &other);

private:
	struct BranchLayout {
		std::vector<std::vector<std::size_t>> spatial;
		std::vector<std::size_t> temporal;
		std::vector<std::size_t> combine;
	};

	void add_branch(BranchLayout &layout, const std::string &prefix, std::size_t d_in);
	BranchVars bind(Tape &tape, const BranchLayout &layout);

	ModelConfig config_;
	ParameterSet params_;
	BranchLayout historical_;
	BranchLayout current_;
	std::size_t final_proj_ = 0, w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
};

} // namespace sstgnn
