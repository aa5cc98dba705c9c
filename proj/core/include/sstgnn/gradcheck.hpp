#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "sstgnn/autodiff.hpp"

namespace sstgnn {

struct GradCheckOptions {
	double step = 1e-5;
	double rel_tol = 1e-4;
	/// Entries with |analytic| below this are compared absolutely.
	double small_threshold = 1e-8;
	double abs_tol = 1e-7;
};

struct GradCheckResult {
	std::size_t checked = 0;
	std::size_t failures = 0;
	double max_rel_error = 0.0;
	double max_abs_error_small = 0.0;
	std::string worst_param;
	std::size_t worst_index = 0;

	bool passed() const noexcept { return checked > 0 && failures == 0; }
};

/// Compares analytic gradients with central finite differences over every
/// entry of every parameter.
///
/// `backward` must zero nothing itself: it runs one forward/backward pass
/// that adds d(loss)/d(param) into Parameter::grad. `loss` must evaluate
/// the same scalar without touching gradients.
GradCheckResult check_gradients(ParameterSet &params, const std::function<double()> &loss,
                                const std::function<void()> &backward, const GradCheckOptions &options = {});

} // namespace sstgnn
