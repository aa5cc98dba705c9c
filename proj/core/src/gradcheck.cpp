#include "sstgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sstgnn {

GradCheckResult check_gradients(ParameterSet &params, const std::function<double()> &loss,
                                const std::function<void()> &backward, const GradCheckOptions &options) {
	params.zero_grads();
	backward();

	std::vector<Tensor> analytic;
	analytic.reserve(params.size());
	for (const auto &p : params) {
		analytic.push_back(p->grad);
	}

	GradCheckResult result;
	for (std::size_t pi = 0; pi < params.size(); ++pi) {
		Parameter &p = params[pi];
		for (std::size_t i = 0; i < p.value.size(); ++i) {
			const double saved = p.value[i];
			p.value[i] = saved + options.step;
			const double up = loss();
			p.value[i] = saved - options.step;
			const double down = loss();
			p.value[i] = saved;

			const double numeric = (up - down) / (2.0 * options.step);
			const double a = analytic[pi][i];
			const double diff = std::abs(a - numeric);
			++result.checked;

			bool ok = false;
			if (std::abs(a) < options.small_threshold) {
				result.max_abs_error_small = std::max(result.max_abs_error_small, diff);
				ok = diff <= options.abs_tol;
			} else {
				const double rel = diff / std::max(std::abs(a), std::abs(numeric));
				if (rel > result.max_rel_error) {
					result.max_rel_error = rel;
					result.worst_param = p.id;
					result.worst_index = i;
				}
				ok = rel <= options.rel_tol;
			}
			if (!ok || !std::isfinite(numeric)) {
				++result.failures;
			}
		}
	}
	return result;
}

} // namespace sstgnn
