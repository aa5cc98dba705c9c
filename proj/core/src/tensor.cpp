#include "sstgnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "sstgnn/errors.hpp"

namespace sstgnn {

std::string to_string(const Shape &shape) {
	std::string out = "[";
	for (std::size_t i = 0; i < shape.size(); ++i) {
		if (i != 0) {
			out += "x";
		}
		out += std::to_string(shape[i]);
	}
	out += "]";
	return out;
}

std::size_t shape_size(const Shape &shape) {
	std::size_t n = 1;
	for (auto d : shape) {
		n *= d;
	}
	return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
	if (shape_size(shape_) != values_.size()) {
		throw DimensionError("tensor shape " + to_string(shape_) + " does not match " +
		                     std::to_string(values_.size()) + " values");
	}
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
	const std::size_t r = rows.size();
	const std::size_t c = r == 0 ? 0 : rows.begin()->size();
	std::vector<double> values;
	values.reserve(r * c);
	for (const auto &row : rows) {
		if (row.size() != c) {
			throw DimensionError("ragged matrix literal");
		}
		values.insert(values.end(), row.begin(), row.end());
	}
	return Tensor({r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
	Tensor t({n, n});
	for (std::size_t i = 0; i < n; ++i) {
		t(i, i) = 1.0;
	}
	return t;
}

Tensor Tensor::scalar(double v) {
	return Tensor({1}, std::vector<double>{v});
}

std::size_t Tensor::dim(std::size_t axis) const {
	if (axis >= shape_.size()) {
		throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
	}
	return shape_[axis];
}

std::size_t Tensor::rows() const {
	if (shape_.size() != 2) {
		throw DimensionError("expected a matrix, got shape " + to_string(shape_));
	}
	return shape_[0];
}

std::size_t Tensor::cols() const {
	if (shape_.size() != 2) {
		throw DimensionError("expected a matrix, got shape " + to_string(shape_));
	}
	return shape_[1];
}

void Tensor::fill(double v) {
	std::fill(values_.begin(), values_.end(), v);
}

bool Tensor::all_finite() const noexcept {
	return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void gemm_accumulate(const Tensor &a, bool transpose_a, const Tensor &b, bool transpose_b, Tensor &c, double alpha) {
	const std::size_t m = transpose_a ? a.cols() : a.rows();
	const std::size_t k = transpose_a ? a.rows() : a.cols();
	const std::size_t kb = transpose_b ? b.cols() : b.rows();
	const std::size_t n = transpose_b ? b.rows() : b.cols();
	if (k != kb || c.rows() != m || c.cols() != n) {
		throw DimensionError("gemm: cannot multiply " + to_string(a.shape()) + (transpose_a ? "^T" : "") + " by " +
		                     to_string(b.shape()) + (transpose_b ? "^T" : "") + " into " + to_string(c.shape()));
	}
	const double *pa = a.data();
	const double *pb = b.data();
	double *pc = c.data();
	const std::size_t lda = a.cols();
	const std::size_t ldb = b.cols();

	if (!transpose_a && !transpose_b) {
		for (std::size_t i = 0; i < m; ++i) {
			double *crow = pc + i * n;
			for (std::size_t p = 0; p < k; ++p) {
				const double av = alpha * pa[i * lda + p];
				if (av == 0.0) {
					continue;
				}
				const double *brow = pb + p * ldb;
				for (std::size_t j = 0; j < n; ++j) {
					crow[j] += av * brow[j];
				}
			}
		}
	} else if (transpose_a && !transpose_b) {
		// C[i,j] += sum_p A[p,i] B[p,j]
		for (std::size_t p = 0; p < k; ++p) {
			const double *arow = pa + p * lda;
			const double *brow = pb + p * ldb;
			for (std::size_t i = 0; i < m; ++i) {
				const double av = alpha * arow[i];
				if (av == 0.0) {
					continue;
				}
				double *crow = pc + i * n;
				for (std::size_t j = 0; j < n; ++j) {
					crow[j] += av * brow[j];
				}
			}
		}
	} else if (!transpose_a && transpose_b) {
		// C[i,j] += sum_p A[i,p] B[j,p]
		for (std::size_t i = 0; i < m; ++i) {
			const double *arow = pa + i * lda;
			double *crow = pc + i * n;
			for (std::size_t j = 0; j < n; ++j) {
				const double *brow = pb + j * ldb;
				double acc = 0.0;
				for (std::size_t p = 0; p < k; ++p) {
					acc += arow[p] * brow[p];
				}
				crow[j] += alpha * acc;
			}
		}
	} else {
		for (std::size_t i = 0; i < m; ++i) {
			double *crow = pc + i * n;
			for (std::size_t j = 0; j < n; ++j) {
				double acc = 0.0;
				for (std::size_t p = 0; p < k; ++p) {
					acc += pa[p * lda + i] * pb[j * ldb + p];
				}
				crow[j] += alpha * acc;
			}
		}
	}
}

Tensor matmul(const Tensor &a, const Tensor &b) {
	if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
		throw DimensionError("matmul: inner dimensions differ for " + to_string(a.shape()) + " and " +
		                     to_string(b.shape()));
	}
	Tensor c({a.rows(), b.cols()});
	gemm_accumulate(a, false, b, false, c);
	return c;
}

Tensor transpose(const Tensor &a) {
	Tensor t({a.cols(), a.rows()});
	for (std::size_t i = 0; i < a.rows(); ++i) {
		for (std::size_t j = 0; j < a.cols(); ++j) {
			t(j, i) = a(i, j);
		}
	}
	return t;
}

double max_abs_diff(const Tensor &a, const Tensor &b) {
	if (a.shape() != b.shape()) {
		throw DimensionError("max_abs_diff: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
	}
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		m = std::max(m, std::abs(a[i] - b[i]));
	}
	return m;
}

} // namespace sstgnn
