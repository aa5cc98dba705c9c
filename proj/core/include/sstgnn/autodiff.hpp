#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sstgnn/tensor.hpp"

namespace sstgnn {

/// A learnable tensor with its gradient accumulator.
struct Parameter {
	std::string id;
	Tensor value;
	Tensor grad;

	Parameter() = default;
	Parameter(std::string id, Tensor value);

	void zero_grad();
};

/// Ordered collection of parameters. Element addresses are stable once
/// construction is finished, so tapes may hold pointers into it.
class ParameterSet {
public:
	/// Adds a parameter; returns its index. Ids must be unique.
	std::size_t add(std::string id, Tensor value);

	std::size_t size() const noexcept { return params_.size(); }
	Parameter &operator[](std::size_t i) { return *params_[i]; }
	const Parameter &operator[](std::size_t i) const { return *params_[i]; }

	/// Index of the parameter with this id; throws ContractError if absent.
	std::size_t index_of(const std::string &id) const;
	bool contains(const std::string &id) const;

	void zero_grads();
	std::size_t total_elements() const;

	auto begin() { return params_.begin(); }
	auto end() { return params_.end(); }
	auto begin() const { return params_.cbegin(); }
	auto end() const { return params_.cend(); }

	/// Deep copy of values and grads.
	ParameterSet clone() const;

private:
	std::vector<std::unique_ptr<Parameter>> params_;
};

/// Compressed-row sparse matrix applied blockwise to stacked node features.
struct SparseMatrix {
	std::size_t n_rows = 0;
	std::size_t n_cols = 0;
	std::vector<std::size_t> row_ptr{0};
	std::vector<std::size_t> col_idx;
	std::vector<double> weights;

	std::size_t nnz() const noexcept { return col_idx.size(); }
	Tensor to_dense() const;
};

/// Y = A X applied independently to each consecutive block of A.n_cols rows of X.
Tensor block_spmm(const SparseMatrix &a, const Tensor &x);

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
	Tape *tape = nullptr;
	std::uint32_t index = 0;

	const Tensor &value() const;
	const Tensor &grad() const;
	const Shape &shape() const { return value().shape(); }
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, which is always a valid
/// topological order. backward() seeds d(loss)/d(loss) = 1 and pushes
/// gradients to inputs; parameter leaves add their gradient into
/// Parameter::grad, so repeated uses accumulate.
class Tape {
public:
	using BackwardFn = std::function<void(Tape &, std::uint32_t self)>;

	Tape() = default;
	Tape(const Tape &) = delete;
	Tape &operator=(const Tape &) = delete;

	Var constant(Tensor value);
	Var parameter(Parameter &p);

	/// Records a derived node. `backward` reads grad(self) and calls accumulate() on inputs.
	Var record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward);

	const Tensor &value(std::uint32_t node) const { return nodes_[node].value; }
	const Tensor &grad(std::uint32_t node) const;
	const std::vector<std::uint32_t> &inputs(std::uint32_t node) const { return nodes_[node].inputs; }
	bool requires_grad(std::uint32_t node) const { return nodes_[node].requires_grad; }
	std::size_t size() const noexcept { return nodes_.size(); }

	/// Adds `g` into the gradient of `node` (no-op for constants).
	void accumulate(std::uint32_t node, const Tensor &g);
	/// Mutable gradient buffer of `node`, allocated on first use.
	Tensor &grad_buffer(std::uint32_t node);

	/// Backpropagates from a scalar node in reverse recording order.
	void backward(Var loss);
	/// Backpropagates using a caller-provided topological order (outputs before inputs).
	/// The order must contain every node reachable from `loss`.
	void backward(Var loss, std::span<const std::uint32_t> order);

	/// Nodes reachable from `root` through inputs.
	std::vector<bool> reachable_from(std::uint32_t root) const;

	void clear();

private:
	struct Node {
		Tensor value;
		Tensor grad;
		bool has_grad = false;
		bool requires_grad = false;
		std::vector<std::uint32_t> inputs;
		BackwardFn backward;
		Parameter *param = nullptr;
	};

	void seed(Var loss);
	void visit(std::uint32_t node);

	std::vector<Node> nodes_;
};

// Recorded primitives.

Var matmul(Var a, Var b);
Var relu(Var x);
Var add(Var a, Var b);
/// Concatenation along `axis` of rank-2 values.
Var concat(std::span<const Var> parts, std::size_t axis);
/// Adds a [1 x cols] bias to every row.
Var add_row_bias(Var x, Var bias);
/// Adds row_offsets[r] to every entry of row r (scalar broadcast per row).
Var add_row_scalars(Var x, std::vector<double> row_offsets);
/// Blockwise sparse left-multiplication; the matrix must outlive the tape.
Var sparse_mix(const SparseMatrix &a, Var x);
/// Mean of squared differences against a constant target; returns a [1] scalar.
Var mse(Var pred, const Tensor &target);

/// Elementwise max(x, 0) without recording.
Tensor relu(const Tensor &x);
/// Concatenation without recording.
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
double mse(const Tensor &pred, const Tensor &target);

} // namespace sstgnn
