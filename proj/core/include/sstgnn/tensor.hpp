#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sstgnn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape &shape);

/// Dense row-major array of doubles.
///
/// Most model values are rank-2 (rows x cols); window inputs are rank-3
/// (nodes x timestamps x channels).
class Tensor {
public:
	Tensor() = default;
	explicit Tensor(Shape shape, double fill = 0.0);
	Tensor(Shape shape, std::vector<double> values);

	static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
	static Tensor identity(std::size_t n);
	static Tensor scalar(double v);

	const Shape &shape() const noexcept { return shape_; }
	std::size_t rank() const noexcept { return shape_.size(); }
	std::size_t size() const noexcept { return values_.size(); }
	std::size_t dim(std::size_t axis) const;

	/// Row count and column count of a rank-2 tensor.
	std::size_t rows() const;
	std::size_t cols() const;

	std::span<double> values() noexcept { return values_; }
	std::span<const double> values() const noexcept { return values_; }
	double *data() noexcept { return values_.data(); }
	const double *data() const noexcept { return values_.data(); }

	double &operator[](std::size_t i) { return values_[i]; }
	double operator[](std::size_t i) const { return values_[i]; }

	double &operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
	double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

	double &at(std::size_t i, std::size_t j, std::size_t k) {
		return values_[(i * shape_[1] + j) * shape_[2] + k];
	}
	double at(std::size_t i, std::size_t j, std::size_t k) const {
		return values_[(i * shape_[1] + j) * shape_[2] + k];
	}

	void fill(double v);
	bool all_finite() const noexcept;

	friend bool operator==(const Tensor &a, const Tensor &b) = default;

private:
	Shape shape_;
	std::vector<double> values_;
};

std::size_t shape_size(const Shape &shape);

// Plain (non-recording) kernels shared by the tape and by tests.

/// C = A * B
Tensor matmul(const Tensor &a, const Tensor &b);

/// C += alpha * op(A) * op(B) where op is identity or transpose.
void gemm_accumulate(const Tensor &a, bool transpose_a, const Tensor &b, bool transpose_b, Tensor &c,
                     double alpha = 1.0);

Tensor transpose(const Tensor &a);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor &a, const Tensor &b);

} // namespace sstgnn
