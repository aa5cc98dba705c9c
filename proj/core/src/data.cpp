#include "sstgnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>

#include "csv_util.hpp"
#include "sstgnn/errors.hpp"

namespace sstgnn {

namespace {

std::string_view unquote(std::string_view s) {
	if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
		return s.substr(1, s.size() - 2);
	}
	return s;
}

bool is_missing_token(std::string_view s) {
	return s.empty() || s == "nan" || s == "NaN" || s == "NAN" || s == "NA" || s == "null";
}

std::string location(const std::filesystem::path &path, std::size_t line, std::size_t col) {
	return path.string() + ": row " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace

SpeedSeries load_speed_csv(const std::filesystem::path &path, int samples_per_hour, MissingPolicy missing) {
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open speed file '" + path.string() + "'");
	}
	SpeedSeries series;
	series.samples_per_hour = samples_per_hour;

	std::vector<double> values;
	std::vector<std::pair<std::size_t, std::size_t>> holes; // (row, col) zero-based in the value table
	std::size_t cols = 0;
	std::size_t rows = 0;
	std::size_t line_no = 0;
	std::string line;
	while (std::getline(in, line)) {
		++line_no;
		if (detail::trim(line).empty()) {
			continue;
		}
		const auto fields = detail::split_fields(line);
		if (rows == 0 && cols == 0 && series.sensor_ids.empty()) {
			const bool header = std::any_of(fields.begin(), fields.end(), [](std::string_view f) {
				return !is_missing_token(f) && !detail::parse_double(f);
			});
			if (header) {
				for (auto f : fields) {
					series.sensor_ids.emplace_back(unquote(f));
				}
				cols = fields.size();
				continue;
			}
		}
		if (cols == 0) {
			cols = fields.size();
		}
		if (fields.size() != cols) {
			throw DataError(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
			                " fields, expected " + std::to_string(cols));
		}
		for (std::size_t c = 0; c < cols; ++c) {
			if (is_missing_token(fields[c])) {
				if (missing == MissingPolicy::reject) {
					throw DataError(location(path, line_no, c + 1) + ": missing value");
				}
				holes.emplace_back(rows, c);
				values.push_back(std::numeric_limits<double>::quiet_NaN());
				continue;
			}
			const auto v = detail::parse_double(fields[c]);
			if (!v || !std::isfinite(*v)) {
				throw DataError(location(path, line_no, c + 1) + ": non-numeric value '" + std::string(fields[c]) + "'");
			}
			values.push_back(*v);
		}
		++rows;
	}
	if (rows == 0 || cols == 0) {
		throw DataError(path.string() + ": no data rows");
	}
	series.values = Tensor({rows, cols}, std::move(values));

	if (!holes.empty()) {
		const std::size_t day = series.day_length();
		Tensor &v = series.values;
		for (std::size_t c = 0; c < cols; ++c) {
			for (std::size_t d0 = 0; d0 < rows; d0 += day) {
				const std::size_t d1 = std::min(rows, d0 + day);
				std::optional<double> last;
				for (std::size_t r = d0; r < d1; ++r) {
					if (!std::isnan(v(r, c))) {
						last = v(r, c);
					} else if (last) {
						v(r, c) = *last;
					}
				}
				if (!last) {
					throw DataError(path.string() + ": sensor column " + std::to_string(c + 1) +
					                " has no readings for the day starting at data row " + std::to_string(d0 + 1));
				}
				// leading gap of the day: take the first reading of that day
				std::optional<double> first;
				for (std::size_t r = d0; r < d1 && !first; ++r) {
					if (!std::isnan(v(r, c))) {
						first = v(r, c);
					}
				}
				for (std::size_t r = d0; r < d1 && std::isnan(v(r, c)); ++r) {
					v(r, c) = *first;
				}
			}
		}
		std::cerr << "warning: " << path.string() << ": forward-filled " << holes.size() << " missing readings\n";
	}
	return series;
}

void save_speed_csv(const SpeedSeries &series, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write '" + path.string() + "'");
	}
	const std::size_t n = series.n_nodes();
	if (!series.sensor_ids.empty()) {
		for (std::size_t c = 0; c < series.sensor_ids.size(); ++c) {
			// Quoted so numeric ids still read back as a header.
			out << (c == 0 ? "" : ",") << '"' << series.sensor_ids[c] << '"';
		}
		out << '\n';
	}
	char buf[64];
	for (std::size_t r = 0; r < series.num_timesteps(); ++r) {
		for (std::size_t c = 0; c < n; ++c) {
			const auto res = std::to_chars(buf, buf + sizeof(buf), series.values(r, c));
			if (c != 0) {
				out << ',';
			}
			out.write(buf, res.ptr - buf);
		}
		out << '\n';
	}
	if (!out) {
		throw DataError("write failed for '" + path.string() + "'");
	}
}

std::size_t WindowSpec::max_horizon() const {
	return horizons.empty() ? 0 : *std::max_element(horizons.begin(), horizons.end());
}

std::size_t first_window_start(const WindowSpec &spec, std::size_t day_length) {
	return spec.P * day_length;
}

namespace {

void validate(const WindowSpec &spec) {
	if (spec.T < 1) {
		throw ConfigError("window length T must be at least 1");
	}
	if (spec.horizons.empty() || spec.max_horizon() < 1 ||
	    std::find(spec.horizons.begin(), spec.horizons.end(), 0u) != spec.horizons.end()) {
		throw ConfigError("horizons must be positive step counts");
	}
	if (spec.stride < 1) {
		throw ConfigError("stride must be at least 1");
	}
}

} // namespace

std::vector<std::size_t> window_starts(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec) {
	validate(spec);
	std::vector<std::size_t> out;
	const std::size_t first = first_window_start(spec, day_length);
	const std::size_t span = spec.T + spec.max_horizon();
	for (std::size_t s = first; s + span <= num_timesteps; s += spec.stride) {
		out.push_back(s);
	}
	return out;
}

SampleWindow make_window(const SpeedSeries &series, const WindowSpec &spec, std::size_t start) {
	validate(spec);
	const std::size_t n = series.n_nodes();
	const std::size_t day = series.day_length();
	if (start < first_window_start(spec, day) || start + spec.T + spec.max_horizon() > series.num_timesteps()) {
		throw DataError("window start " + std::to_string(start) + " is out of range");
	}
	SampleWindow w;
	w.start = start;
	w.current_x = Tensor({n, spec.T, 1});
	w.historical_x = Tensor({n, spec.T, spec.P});
	w.target = Tensor({n, spec.horizons.size()});
	w.time_indices.resize(spec.T);
	for (std::size_t tau = 0; tau < spec.T; ++tau) {
		const std::size_t t = start + tau;
		w.time_indices[tau] = static_cast<std::int64_t>(t);
		for (std::size_t u = 0; u < n; ++u) {
			w.current_x.at(u, tau, 0) = series.at(t, u);
			for (std::size_t p = 1; p <= spec.P; ++p) {
				w.historical_x.at(u, tau, p - 1) = series.at(t - p * day, u);
			}
		}
	}
	const std::size_t last = start + spec.T - 1;
	for (std::size_t h = 0; h < spec.horizons.size(); ++h) {
		for (std::size_t u = 0; u < n; ++u) {
			w.target(u, h) = series.at(last + spec.horizons[h], u);
		}
	}
	return w;
}

std::vector<SampleWindow> make_windows(const SpeedSeries &series, const WindowSpec &spec) {
	const auto starts = window_starts(series.num_timesteps(), series.day_length(), spec);
	if (starts.empty()) {
		std::cerr << "warning: series of " << series.num_timesteps() << " samples is shorter than P*day + T + horizon = "
		          << first_window_start(spec, series.day_length()) + spec.T + spec.max_horizon()
		          << "; no windows produced\n";
	}
	std::vector<SampleWindow> out;
	out.reserve(starts.size());
	for (auto s : starts) {
		out.push_back(make_window(series, spec, s));
	}
	return out;
}

std::vector<std::size_t> DatasetSplit::starts(const IndexRange &range, const WindowSpec &spec) const {
	std::vector<std::size_t> out;
	if (range.empty()) {
		return out;
	}
	const std::size_t first = first_model_row;
	std::size_t s = range.begin;
	if (spec.stride > 1 && s > first) {
		const std::size_t rem = (s - first) % spec.stride;
		if (rem != 0) {
			s += spec.stride - rem;
		}
	}
	for (; s < range.end; s += spec.stride) {
		out.push_back(s);
	}
	return out;
}

namespace {

// Window starts whose target rows [s+T, s+T+H-1] fall inside [row_begin, row_end).
IndexRange starts_targeting(std::size_t row_begin, std::size_t row_end, std::size_t first, const WindowSpec &spec) {
	const std::size_t span = spec.T + spec.max_horizon();
	IndexRange r;
	r.begin = std::max(first, row_begin >= spec.T ? row_begin - spec.T : 0);
	r.end = row_end >= span ? row_end - span + 1 : 0;
	if (r.end < r.begin) {
		r.end = r.begin;
	}
	return r;
}

} // namespace

DatasetSplit split_by_days(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec,
                           std::size_t train_days, std::size_t val_days) {
	validate(spec);
	DatasetSplit split;
	split.num_rows = num_timesteps;
	split.train_row_end = std::min(num_timesteps, train_days * day_length);
	split.val_row_end = std::min(num_timesteps, (train_days + val_days) * day_length);
	split.first_model_row = first_window_start(spec, day_length);
	if (split.first_model_row >= split.train_row_end) {
		throw ConfigError("training split of " + std::to_string(train_days) + " days leaves no rows after the " +
		                  std::to_string(spec.P) + " historical days");
	}
	split.train = starts_targeting(0, split.train_row_end, split.first_model_row, spec);
	split.val = starts_targeting(split.train_row_end, split.val_row_end, split.first_model_row, spec);
	split.test = starts_targeting(split.val_row_end, num_timesteps, split.first_model_row, spec);
	return split;
}

DatasetSplit split_by_fraction(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec,
                               double train_fraction, double val_fraction) {
	if (!(train_fraction > 0.0) || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
		throw ConfigError("split fractions must satisfy 0 < train, 0 <= val, train + val <= 1");
	}
	const std::size_t days = num_timesteps / day_length;
	const auto train_days = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(days)));
	const auto val_days = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(days)));
	return split_by_days(num_timesteps, day_length, spec, train_days, val_days);
}

double Normalizer::apply(double v, std::size_t node) const {
	const std::size_t i = mean.size() == 1 ? 0 : node;
	return (v - mean[i]) / stddev[i];
}

double Normalizer::invert(double v, std::size_t node) const {
	const std::size_t i = mean.size() == 1 ? 0 : node;
	return v * stddev[i] + mean[i];
}

SpeedSeries Normalizer::apply(const SpeedSeries &series) const {
	SpeedSeries out = series;
	const std::size_t n = series.n_nodes();
	for (std::size_t t = 0; t < series.num_timesteps(); ++t) {
		for (std::size_t u = 0; u < n; ++u) {
			out.values(t, u) = apply(series.values(t, u), u);
		}
	}
	return out;
}

Tensor Normalizer::invert_rows(const Tensor &t, std::size_t n_nodes) const {
	Tensor out = t;
	for (std::size_t r = 0; r < t.rows(); ++r) {
		for (std::size_t c = 0; c < t.cols(); ++c) {
			out(r, c) = invert(t(r, c), r % n_nodes);
		}
	}
	return out;
}

Normalizer fit_normalizer(const SpeedSeries &series, const DatasetSplit &split, NormalizerMode mode) {
	const std::size_t begin = split.first_model_row;
	const std::size_t end = std::min(split.train_row_end, series.num_timesteps());
	if (begin >= end) {
		throw DataError("cannot fit normalizer: training split has no rows");
	}
	const std::size_t n = series.n_nodes();
	const std::size_t groups = mode == NormalizerMode::global ? 1 : n;
	Normalizer norm;
	norm.mean.assign(groups, 0.0);
	norm.stddev.assign(groups, 0.0);
	std::vector<double> count(groups, 0.0);
	for (std::size_t t = begin; t < end; ++t) {
		for (std::size_t u = 0; u < n; ++u) {
			const std::size_t g = groups == 1 ? 0 : u;
			norm.mean[g] += series.at(t, u);
			count[g] += 1.0;
		}
	}
	for (std::size_t g = 0; g < groups; ++g) {
		norm.mean[g] /= count[g];
	}
	for (std::size_t t = begin; t < end; ++t) {
		for (std::size_t u = 0; u < n; ++u) {
			const std::size_t g = groups == 1 ? 0 : u;
			const double d = series.at(t, u) - norm.mean[g];
			norm.stddev[g] += d * d;
		}
	}
	for (std::size_t g = 0; g < groups; ++g) {
		norm.stddev[g] = std::sqrt(norm.stddev[g] / count[g]);
		if (!(norm.stddev[g] > 1e-12 * std::max(1.0, std::abs(norm.mean[g])))) {
			throw DataError("training data has zero variance" +
			                (groups == 1 ? std::string() : " for sensor " + std::to_string(g)) +
			                "; check for constant or placeholder data");
		}
	}
	return norm;
}

SyntheticDataset synthesize(const SynthConfig &config) {
	if (config.n_nodes < 2) {
		throw ConfigError("synthetic data needs at least 2 nodes");
	}
	if (config.n_days < 9) {
		throw ConfigError("synthetic data needs at least 9 days (7 history days plus train and test)");
	}
	if (config.noise_std < 0.0 || config.noise_persistence < 0.0 || config.noise_persistence >= 1.0) {
		throw ConfigError("noise_std must be >= 0 and noise_persistence in [0, 1)");
	}
	const std::size_t n = config.n_nodes;
	std::mt19937_64 rng(config.seed);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

	// Sensors along a corridor; consecutive gaps stay below the kernel
	// cutoff (~0.263 for delta=0.1, eps=0.5) so the graph is connected.
	std::vector<double> x(n), y(n);
	for (std::size_t i = 0; i < n; ++i) {
		x[i] = i == 0 ? 0.0 : x[i - 1] + uniform(0.08, 0.22);
		y[i] = uniform(-0.05, 0.05);
	}
	SyntheticDataset out;
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = i + 1; j < n; ++j) {
			const double d = std::hypot(x[i] - x[j], y[i] - y[j]);
			if (d <= 0.6) {
				out.distances.entries.push_back({i, j, d});
			}
		}
	}
	const SensorGraph graph = build_adjacency(out.distances, n, 0.1, 0.5);

	struct Profile {
		double base, morning, evening, lag;
	};
	std::vector<Profile> prof(n);
	const double span = std::max(x.back(), 1e-9);
	for (std::size_t i = 0; i < n; ++i) {
		prof[i] = {60.0 + uniform(-5.0, 5.0), uniform(10.0, 25.0), uniform(10.0, 25.0), 0.75 * x[i] / span};
	}
	// Weekday congestion factors (Mon..Fri), then weekend.
	constexpr double weekday_factor[7] = {1.0, 1.05, 1.0, 0.95, 0.9, 0.2, 0.15};
	constexpr double weekend_lift[7] = {0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 4.0};

	const int sph = config.samples_per_hour;
	const std::size_t day = 24 * static_cast<std::size_t>(sph);
	const std::size_t rows = config.n_days * day;
	std::vector<double> values(rows * n);

	std::vector<std::vector<std::size_t>> nbrs(n);
	for (std::size_t i = 0; i < n; ++i) {
		nbrs[i] = graph.neighbors(i);
	}
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::vector<double> noise(n, 0.0), white(n), smooth(n);
	const double phi = config.noise_persistence;
	// Smoothing mixes independent draws; 0.5 w_i + 0.5 mean(w_nbrs) has
	// variance 0.25 + 0.25/deg, rescaled to unit before the AR recursion.
	std::vector<double> smooth_scale(n);
	for (std::size_t i = 0; i < n; ++i) {
		const double deg = static_cast<double>(nbrs[i].size());
		smooth_scale[i] = deg == 0.0 ? 1.0 : 1.0 / std::sqrt(0.25 + 0.25 / deg);
	}
	const double innovation = config.noise_std * std::sqrt(1.0 - phi * phi);
	if (config.noise_std > 0.0) {
		for (std::size_t i = 0; i < n; ++i) {
			noise[i] = config.noise_std * gauss(rng);
		}
	}

	for (std::size_t t = 0; t < rows; ++t) {
		const std::size_t slot = t % day;
		const std::size_t dow = (t / day) % 7;
		const double hour = static_cast<double>(slot) / static_cast<double>(sph);
		if (config.noise_std > 0.0) {
			for (std::size_t i = 0; i < n; ++i) {
				white[i] = gauss(rng);
			}
			for (std::size_t i = 0; i < n; ++i) {
				double m = 0.0;
				for (auto j : nbrs[i]) {
					m += white[j];
				}
				smooth[i] = nbrs[i].empty() ? white[i] : smooth_scale[i] * (0.5 * white[i] + 0.5 * m / nbrs[i].size());
				noise[i] = phi * noise[i] + innovation * smooth[i];
			}
		}
		for (std::size_t i = 0; i < n; ++i) {
			const auto &p = prof[i];
			const double hm = hour - 8.0 - p.lag;
			const double he = hour - 17.5 - p.lag;
			const double dips = p.morning * std::exp(-hm * hm / (2.0 * 0.8 * 0.8)) +
			                    p.evening * std::exp(-he * he / (2.0 * 1.0 * 1.0));
			values[t * n + i] = p.base + weekend_lift[dow] - weekday_factor[dow] * dips + noise[i];
		}
	}
	out.series.values = Tensor({rows, n}, std::move(values));
	out.series.samples_per_hour = sph;
	return out;
}

} // namespace sstgnn
