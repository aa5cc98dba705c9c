#include "sstgnn/autodiff.hpp"

#include <algorithm>
#include <utility>

#include "sstgnn/errors.hpp"

namespace sstgnn {

Parameter::Parameter(std::string id_, Tensor value_)
    : id(std::move(id_)), value(std::move(value_)), grad(value.shape()) {
}

void Parameter::zero_grad() {
	grad.fill(0.0);
}

std::size_t ParameterSet::add(std::string id, Tensor value) {
	if (contains(id)) {
		throw ContractError("duplicate parameter id '" + id + "'");
	}
	params_.push_back(std::make_unique<Parameter>(std::move(id), std::move(value)));
	return params_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string &id) const {
	for (std::size_t i = 0; i < params_.size(); ++i) {
		if (params_[i]->id == id) {
			return i;
		}
	}
	throw ContractError("unknown parameter id '" + id + "'");
}

bool ParameterSet::contains(const std::string &id) const {
	return std::any_of(params_.begin(), params_.end(), [&](const auto &p) { return p->id == id; });
}

void ParameterSet::zero_grads() {
	for (auto &p : params_) {
		p->zero_grad();
	}
}

std::size_t ParameterSet::total_elements() const {
	std::size_t n = 0;
	for (const auto &p : params_) {
		n += p->value.size();
	}
	return n;
}

ParameterSet ParameterSet::clone() const {
	ParameterSet out;
	for (const auto &p : params_) {
		out.params_.push_back(std::make_unique<Parameter>(*p));
	}
	return out;
}

Tensor SparseMatrix::to_dense() const {
	Tensor d({n_rows, n_cols});
	for (std::size_t r = 0; r < n_rows; ++r) {
		for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
			d(r, col_idx[e]) += weights[e];
		}
	}
	return d;
}

namespace {

void check_block_shape(const SparseMatrix &a, const Tensor &x) {
	if (a.n_rows != a.n_cols) {
		throw DimensionError("blockwise sparse product needs a square matrix");
	}
	if (x.rank() != 2 || a.n_cols == 0 || x.rows() % a.n_cols != 0) {
		throw DimensionError("sparse matrix of size " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) +
		                     " cannot act on stacked features " + to_string(x.shape()));
	}
}

// Y_block += A X_block   (transpose=false)
// Y_block += A^T X_block (transpose=true)
void block_spmm_accumulate(const SparseMatrix &a, const Tensor &x, Tensor &y, bool transpose) {
	const std::size_t n = a.n_rows;
	const std::size_t d = x.cols();
	const std::size_t blocks = x.rows() / n;
	for (std::size_t b = 0; b < blocks; ++b) {
		const double *xb = x.data() + b * n * d;
		double *yb = y.data() + b * n * d;
		for (std::size_t r = 0; r < n; ++r) {
			for (std::size_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) {
				const std::size_t c = a.col_idx[e];
				const double w = a.weights[e];
				const double *src = transpose ? xb + r * d : xb + c * d;
				double *dst = transpose ? yb + c * d : yb + r * d;
				for (std::size_t j = 0; j < d; ++j) {
					dst[j] += w * src[j];
				}
			}
		}
	}
}

Tape &same_tape(Var a, Var b) {
	if (a.tape == nullptr || a.tape != b.tape) {
		throw ContractError("operands recorded on different tapes");
	}
	return *a.tape;
}

} // namespace

Tensor block_spmm(const SparseMatrix &a, const Tensor &x) {
	check_block_shape(a, x);
	Tensor y(x.shape());
	block_spmm_accumulate(a, x, y, false);
	return y;
}

const Tensor &Var::value() const {
	return tape->value(index);
}

const Tensor &Var::grad() const {
	return tape->grad(index);
}

Var Tape::constant(Tensor value) {
	Node node;
	node.value = std::move(value);
	nodes_.push_back(std::move(node));
	return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter &p) {
	Node node;
	node.value = p.value;
	node.requires_grad = true;
	node.param = &p;
	nodes_.push_back(std::move(node));
	return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward) {
	Node node;
	node.value = std::move(value);
	node.requires_grad =
	    std::any_of(inputs.begin(), inputs.end(), [&](std::uint32_t i) { return nodes_[i].requires_grad; });
	node.inputs = std::move(inputs);
	if (node.requires_grad) {
		node.backward = std::move(backward);
	}
	nodes_.push_back(std::move(node));
	return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor &Tape::grad(std::uint32_t node) const {
	const Node &n = nodes_[node];
	if (!n.has_grad) {
		throw ContractError("node " + std::to_string(node) + " has no gradient; run backward() first");
	}
	return n.grad;
}

Tensor &Tape::grad_buffer(std::uint32_t node) {
	Node &n = nodes_[node];
	if (!n.has_grad) {
		n.grad = Tensor(n.value.shape());
		n.has_grad = true;
	}
	return n.grad;
}

void Tape::accumulate(std::uint32_t node, const Tensor &g) {
	if (!nodes_[node].requires_grad) {
		return;
	}
	Tensor &buf = grad_buffer(node);
	if (buf.shape() != g.shape()) {
		throw DimensionError("gradient shape " + to_string(g.shape()) + " does not match value shape " +
		                     to_string(buf.shape()));
	}
	for (std::size_t i = 0; i < buf.size(); ++i) {
		buf[i] += g[i];
	}
}

void Tape::seed(Var loss) {
	if (loss.tape != this) {
		throw ContractError("backward: loss belongs to another tape");
	}
	if (nodes_[loss.index].value.size() != 1) {
		throw ContractError("backward: loss must be a scalar, got shape " + to_string(nodes_[loss.index].value.shape()));
	}
	for (auto &n : nodes_) {
		n.has_grad = false;
		n.grad = Tensor();
	}
	grad_buffer(loss.index).fill(1.0);
}

void Tape::visit(std::uint32_t index) {
	Node &n = nodes_[index];
	if (!n.has_grad || !n.requires_grad) {
		return;
	}
	if (n.backward) {
		n.backward(*this, index);
	}
	if (n.param != nullptr) {
		Tensor &g = n.param->grad;
		for (std::size_t i = 0; i < g.size(); ++i) {
			g[i] += n.grad[i];
		}
	}
}

void Tape::backward(Var loss) {
	seed(loss);
	for (std::uint32_t i = loss.index + 1; i-- > 0;) {
		visit(i);
	}
}

void Tape::backward(Var loss, std::span<const std::uint32_t> order) {
	const auto reach = reachable_from(loss.index);
	std::vector<std::size_t> position(nodes_.size(), nodes_.size());
	for (std::size_t pos = 0; pos < order.size(); ++pos) {
		if (order[pos] >= nodes_.size() || position[order[pos]] != nodes_.size()) {
			throw ContractError("backward: order has an invalid or repeated node");
		}
		position[order[pos]] = pos;
	}
	for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
		if (!reach[i]) {
			continue;
		}
		if (position[i] == nodes_.size()) {
			throw ContractError("backward: order misses reachable node " + std::to_string(i));
		}
		for (auto in : nodes_[i].inputs) {
			if (position[in] <= position[i]) {
				throw ContractError("backward: order is not topological");
			}
		}
	}
	seed(loss);
	for (auto i : order) {
		visit(i);
	}
}

std::vector<bool> Tape::reachable_from(std::uint32_t root) const {
	std::vector<bool> seen(nodes_.size(), false);
	std::vector<std::uint32_t> stack{root};
	seen[root] = true;
	while (!stack.empty()) {
		const auto cur = stack.back();
		stack.pop_back();
		for (auto in : nodes_[cur].inputs) {
			if (!seen[in]) {
				seen[in] = true;
				stack.push_back(in);
			}
		}
	}
	return seen;
}

void Tape::clear() {
	nodes_.clear();
}

Var matmul(Var a, Var b) {
	Tape &tape = same_tape(a, b);
	Tensor c = matmul(a.value(), b.value());
	const auto ia = a.index;
	const auto ib = b.index;
	return tape.record(std::move(c), {ia, ib}, [ia, ib](Tape &t, std::uint32_t self) {
		const Tensor &dc = t.grad(self);
		if (t.requires_grad(ia)) {
			gemm_accumulate(dc, false, t.value(ib), true, t.grad_buffer(ia));
		}
		if (t.requires_grad(ib)) {
			gemm_accumulate(t.value(ia), true, dc, false, t.grad_buffer(ib));
		}
	});
}

Tensor relu(const Tensor &x) {
	Tensor y = x;
	for (auto &v : y.values()) {
		v = v > 0.0 ? v : 0.0;
	}
	return y;
}

Var relu(Var x) {
	const auto ix = x.index;
	return x.tape->record(relu(x.value()), {ix}, [ix](Tape &t, std::uint32_t self) {
		const Tensor &dy = t.grad(self);
		const Tensor &xv = t.value(ix);
		Tensor &dx = t.grad_buffer(ix);
		for (std::size_t i = 0; i < dx.size(); ++i) {
			// subgradient 0 at exactly 0
			if (xv[i] > 0.0) {
				dx[i] += dy[i];
			}
		}
	});
}

Var add(Var a, Var b) {
	Tape &tape = same_tape(a, b);
	if (a.shape() != b.shape()) {
		throw DimensionError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
	}
	Tensor c = a.value();
	const Tensor &bv = b.value();
	for (std::size_t i = 0; i < c.size(); ++i) {
		c[i] += bv[i];
	}
	const auto ia = a.index;
	const auto ib = b.index;
	return tape.record(std::move(c), {ia, ib}, [ia, ib](Tape &t, std::uint32_t self) {
		const Tensor &dc = t.grad(self);
		t.accumulate(ia, dc);
		t.accumulate(ib, dc);
	});
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
	if (parts.empty()) {
		throw DimensionError("concat: no parts");
	}
	if (axis > 1) {
		throw DimensionError("concat: axis must be 0 or 1 for matrices");
	}
	const std::size_t rows0 = parts[0].rows();
	const std::size_t cols0 = parts[0].cols();
	std::size_t total = 0;
	for (const auto &p : parts) {
		if ((axis == 1 && p.rows() != rows0) || (axis == 0 && p.cols() != cols0)) {
			throw DimensionError("concat: part " + to_string(p.shape()) + " incompatible with " +
			                     to_string(parts[0].shape()) + " along axis " + std::to_string(axis));
		}
		total += axis == 1 ? p.cols() : p.rows();
	}
	if (axis == 0) {
		std::vector<double> values;
		values.reserve(total * cols0);
		for (const auto &p : parts) {
			values.insert(values.end(), p.values().begin(), p.values().end());
		}
		return Tensor({total, cols0}, std::move(values));
	}
	Tensor out({rows0, total});
	std::size_t offset = 0;
	for (const auto &p : parts) {
		const std::size_t c = p.cols();
		for (std::size_t r = 0; r < rows0; ++r) {
			std::copy_n(p.data() + r * c, c, out.data() + r * total + offset);
		}
		offset += c;
	}
	return out;
}

Var concat(std::span<const Var> parts, std::size_t axis) {
	if (parts.empty()) {
		throw DimensionError("concat: no parts");
	}
	Tape &tape = *parts[0].tape;
	std::vector<Tensor> values;
	std::vector<std::uint32_t> inputs;
	values.reserve(parts.size());
	for (const auto &p : parts) {
		same_tape(parts[0], p);
		values.push_back(p.value());
		inputs.push_back(p.index);
	}
	Tensor out = concat(values, axis);
	return tape.record(std::move(out), inputs, [inputs, axis](Tape &t, std::uint32_t self) {
		const Tensor &dy = t.grad(self);
		std::size_t offset = 0;
		for (auto in : inputs) {
			const Tensor &v = t.value(in);
			const std::size_t r = v.rows();
			const std::size_t c = v.cols();
			if (t.requires_grad(in)) {
				Tensor &g = t.grad_buffer(in);
				for (std::size_t i = 0; i < r; ++i) {
					for (std::size_t j = 0; j < c; ++j) {
						g(i, j) += axis == 1 ? dy(i, offset + j) : dy(offset + i, j);
					}
				}
			}
			offset += axis == 1 ? c : r;
		}
	});
}

Var add_row_bias(Var x, Var bias) {
	Tape &tape = same_tape(x, bias);
	const Tensor &xv = x.value();
	const Tensor &bv = bias.value();
	if (bv.rank() != 2 || bv.rows() != 1 || bv.cols() != xv.cols()) {
		throw DimensionError("add_row_bias: bias " + to_string(bv.shape()) + " does not fit " + to_string(xv.shape()));
	}
	Tensor y = xv;
	for (std::size_t r = 0; r < y.rows(); ++r) {
		for (std::size_t c = 0; c < y.cols(); ++c) {
			y(r, c) += bv(0, c);
		}
	}
	const auto ix = x.index;
	const auto ib = bias.index;
	return tape.record(std::move(y), {ix, ib}, [ix, ib](Tape &t, std::uint32_t self) {
		const Tensor &dy = t.grad(self);
		t.accumulate(ix, dy);
		if (t.requires_grad(ib)) {
			Tensor &gb = t.grad_buffer(ib);
			for (std::size_t r = 0; r < dy.rows(); ++r) {
				for (std::size_t c = 0; c < dy.cols(); ++c) {
					gb(0, c) += dy(r, c);
				}
			}
		}
	});
}

Var add_row_scalars(Var x, std::vector<double> row_offsets) {
	const Tensor &xv = x.value();
	if (xv.rank() != 2 || row_offsets.size() != xv.rows()) {
		throw DimensionError("add_row_scalars: " + std::to_string(row_offsets.size()) + " offsets for " +
		                     to_string(xv.shape()));
	}
	Tensor y = xv;
	for (std::size_t r = 0; r < y.rows(); ++r) {
		for (std::size_t c = 0; c < y.cols(); ++c) {
			y(r, c) += row_offsets[r];
		}
	}
	const auto ix = x.index;
	return x.tape->record(std::move(y), {ix}, [ix](Tape &t, std::uint32_t self) {
		t.accumulate(ix, t.grad(self));
	});
}

Var sparse_mix(const SparseMatrix &a, Var x) {
	check_block_shape(a, x.value());
	Tensor y = block_spmm(a, x.value());
	const auto ix = x.index;
	const SparseMatrix *pa = &a;
	return x.tape->record(std::move(y), {ix}, [ix, pa](Tape &t, std::uint32_t self) {
		if (t.requires_grad(ix)) {
			block_spmm_accumulate(*pa, t.grad(self), t.grad_buffer(ix), true);
		}
	});
}

double mse(const Tensor &pred, const Tensor &target) {
	if (pred.shape() != target.shape()) {
		throw DimensionError("mse: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
	}
	if (pred.size() == 0) {
		throw DimensionError("mse: empty operands");
	}
	double acc = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double r = pred[i] - target[i];
		acc += r * r;
	}
	return acc / static_cast<double>(pred.size());
}

Var mse(Var pred, const Tensor &target) {
	const double loss = mse(pred.value(), target);
	const auto ip = pred.index;
	return pred.tape->record(Tensor::scalar(loss), {ip}, [ip, target](Tape &t, std::uint32_t self) {
		if (!t.requires_grad(ip)) {
			return;
		}
		const double upstream = t.grad(self)[0];
		const Tensor &p = t.value(ip);
		Tensor &g = t.grad_buffer(ip);
		const double scale = 2.0 * upstream / static_cast<double>(p.size());
		for (std::size_t i = 0; i < p.size(); ++i) {
			g[i] += scale * (p[i] - target[i]);
		}
	});
}

} // namespace sstgnn
