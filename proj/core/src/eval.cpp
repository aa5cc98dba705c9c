#include "sstgnn/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sstgnn/errors.hpp"
#include "sstgnn/train.hpp"

namespace sstgnn {

MetricValues metrics(std::span<const double> pred, std::span<const double> truth, double mask_floor) {
	if (pred.size() != truth.size()) {
		throw DimensionError("metrics: " + std::to_string(pred.size()) + " predictions vs " +
		                     std::to_string(truth.size()) + " truths");
	}
	MetricValues m;
	m.count = pred.size();
	if (m.count == 0) {
		throw DimensionError("metrics: no entries");
	}
	double abs_sum = 0.0;
	double sq_sum = 0.0;
	double pct_sum = 0.0;
	std::size_t pct_count = 0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double e = pred[i] - truth[i];
		abs_sum += std::abs(e);
		sq_sum += e * e;
		if (std::abs(truth[i]) >= mask_floor) {
			pct_sum += std::abs(e) / std::abs(truth[i]);
			++pct_count;
		} else {
			++m.masked;
		}
	}
	const auto n = static_cast<double>(m.count);
	m.mae = abs_sum / n;
	m.rmse = std::sqrt(sq_sum / n);
	if (pct_count > 0) {
		m.mape = 100.0 * pct_sum / static_cast<double>(pct_count);
	}
	return m;
}

MetricValues metrics(const Tensor &pred, const Tensor &truth, double mask_floor) {
	if (pred.shape() != truth.shape()) {
		throw DimensionError("metrics: shapes " + to_string(pred.shape()) + " and " + to_string(truth.shape()));
	}
	return metrics(pred.values(), truth.values(), mask_floor);
}

const HorizonMetrics *ForecastReport::at_step(std::size_t step) const {
	for (const auto &h : horizons) {
		if (h.step == step) {
			return &h;
		}
	}
	return nullptr;
}

Tensor baseline_historical_average(const SpeedSeries &raw, const WindowSpec &spec, std::size_t start) {
	if (spec.P < 1) {
		throw ConfigError("historical average needs at least one history day");
	}
	const std::size_t n = raw.n_nodes();
	const std::size_t day = raw.day_length();
	const std::size_t last = start + spec.T - 1;
	if (start < spec.P * day || last + spec.max_horizon() >= raw.num_timesteps()) {
		throw DataError("window start " + std::to_string(start) + " is out of range for the historical average");
	}
	Tensor out({n, spec.horizons.size()});
	for (std::size_t h = 0; h < spec.horizons.size(); ++h) {
		const std::size_t t = last + spec.horizons[h];
		for (std::size_t u = 0; u < n; ++u) {
			double s = 0.0;
			for (std::size_t p = 1; p <= spec.P; ++p) {
				s += raw.at(t - p * day, u);
			}
			out(u, h) = s / static_cast<double>(spec.P);
		}
	}
	return out;
}

namespace {

std::vector<std::size_t> step_columns(const std::vector<std::size_t> &horizons, const std::vector<std::size_t> &steps) {
	std::vector<std::size_t> cols;
	for (auto s : steps) {
		const auto it = std::find(horizons.begin(), horizons.end(), s);
		if (it == horizons.end()) {
			throw ConfigError("report step " + std::to_string(s) + " is not among the predicted horizons");
		}
		cols.push_back(static_cast<std::size_t>(it - horizons.begin()));
	}
	return cols;
}

ForecastReport score(const std::string &label, const std::vector<PredictionRow> &rows,
                     const std::vector<std::size_t> &steps, int interval_minutes, double mask_floor) {
	ForecastReport report;
	report.label = label;
	for (auto step : steps) {
		std::vector<double> p, t;
		for (const auto &r : rows) {
			if (r.horizon_step == step) {
				p.push_back(r.prediction);
				t.push_back(r.truth);
			}
		}
		if (p.empty()) {
			throw DataError("no windows to evaluate");
		}
		report.horizons.push_back({step, static_cast<int>(step) * interval_minutes, metrics(p, t, mask_floor)});
	}
	return report;
}

} // namespace

Evaluation evaluate_model(SstGnn &model, const SpeedSeries &raw, const SpeedSeries &normalized,
                          const Normalizer &normalizer, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
                          const std::vector<std::size_t> &starts, const std::vector<std::size_t> &report_steps,
                          double mask_floor, std::size_t batch_size) {
	const auto &cfg = model.config();
	const WindowSpec spec = cfg.window_spec();
	const auto cols = step_columns(cfg.horizons, report_steps);
	const std::size_t n = raw.n_nodes();
	batch_size = std::max<std::size_t>(batch_size, 1);

	Evaluation ev;
	ev.rows.reserve(starts.size() * n * cols.size());
	for (std::size_t b = 0; b < starts.size(); b += batch_size) {
		const std::size_t e = std::min(starts.size(), b + batch_size);
		const auto chunk = std::span(starts).subspan(b, e - b);
		const Batch batch = batch_from_starts(normalized, spec, chunk);
		const Tensor pred = normalizer.invert_rows(model.predict(batch, hops, encoder), n);
		for (std::size_t w = 0; w < chunk.size(); ++w) {
			const std::size_t last = chunk[w] + spec.T - 1;
			for (std::size_t u = 0; u < n; ++u) {
				for (std::size_t c = 0; c < cols.size(); ++c) {
					const std::size_t step = report_steps[c];
					PredictionRow row;
					row.time_index = static_cast<std::int64_t>(last + step);
					row.sensor = u;
					row.horizon_step = step;
					row.truth = raw.at(last + step, u);
					row.prediction = pred(w * n + u, cols[c]);
					ev.rows.push_back(row);
				}
			}
		}
	}
	ev.report = score("SST-GNN", ev.rows, report_steps, raw.interval_minutes(), mask_floor);
	return ev;
}

Evaluation evaluate_historical_average(const SpeedSeries &raw, const WindowSpec &spec,
                                       const std::vector<std::size_t> &starts,
                                       const std::vector<std::size_t> &report_steps, double mask_floor) {
	const auto cols = step_columns(spec.horizons, report_steps);
	const std::size_t n = raw.n_nodes();
	Evaluation ev;
	for (auto s : starts) {
		const Tensor pred = baseline_historical_average(raw, spec, s);
		const std::size_t last = s + spec.T - 1;
		for (std::size_t u = 0; u < n; ++u) {
			for (std::size_t c = 0; c < cols.size(); ++c) {
				const std::size_t step = report_steps[c];
				ev.rows.push_back({static_cast<std::int64_t>(last + step), u, step, raw.at(last + step, u),
				                   pred(u, cols[c])});
			}
		}
	}
	ev.report = score("historical average", ev.rows, report_steps, raw.interval_minutes(), mask_floor);
	return ev;
}

void write_predictions_csv(const std::vector<PredictionRow> &rows, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write predictions to '" + path.string() + "'");
	}
	out << "time_index,sensor,horizon_step,truth,prediction\n";
	char a[64];
	char b[64];
	for (const auto &r : rows) {
		const auto ea = std::to_chars(a, a + sizeof(a), r.truth).ptr;
		const auto eb = std::to_chars(b, b + sizeof(b), r.prediction).ptr;
		out << r.time_index << ',' << r.sensor << ',' << r.horizon_step << ',';
		out.write(a, ea - a);
		out << ',';
		out.write(b, eb - b);
		out << '\n';
	}
	if (!out) {
		throw DataError("write failed for '" + path.string() + "'");
	}
}

std::string format_report(const ForecastReport &report) {
	std::ostringstream os;
	char line[160];
	os << report.label << '\n';
	std::snprintf(line, sizeof(line), "%8s %6s %10s %10s %10s %8s %8s\n", "horizon", "step", "MAE", "RMSE", "MAPE(%)",
	              "points", "masked");
	os << line;
	for (const auto &h : report.horizons) {
		char mape[32];
		if (h.values.mape) {
			std::snprintf(mape, sizeof(mape), "%10.4f", *h.values.mape);
		} else {
			std::snprintf(mape, sizeof(mape), "%10s", "n/a");
		}
		std::snprintf(line, sizeof(line), "%5d min %6zu %10.4f %10.4f %s %8zu %8zu\n", h.minutes, h.step, h.values.mae,
		              h.values.rmse, mape, h.values.count, h.values.masked);
		os << line;
	}
	return os.str();
}

void write_report_json(const std::vector<ForecastReport> &reports, const std::filesystem::path &path) {
	nlohmann::json doc = nlohmann::json::array();
	for (const auto &r : reports) {
		nlohmann::json jr;
		jr["label"] = r.label;
		jr["horizons"] = nlohmann::json::array();
		for (const auto &h : r.horizons) {
			nlohmann::json jh;
			jh["step"] = h.step;
			jh["minutes"] = h.minutes;
			jh["mae"] = h.values.mae;
			jh["rmse"] = h.values.rmse;
			jh["mape"] = h.values.mape ? nlohmann::json(*h.values.mape) : nlohmann::json(nullptr);
			jh["count"] = h.values.count;
			jh["masked"] = h.values.masked;
			jr["horizons"].push_back(jh);
		}
		doc.push_back(jr);
	}
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write report to '" + path.string() + "'");
	}
	out << doc.dump(2) << '\n';
}

std::optional<ForecastReport> reference_report(const std::string &preset) {
	// MAE, RMSE, MAPE at 15/30/45/60 minutes.
	static const std::map<std::string, std::array<double, 12>> published = {
	    {"pemsd7", {2.04, 3.53, 4.77, 2.67, 4.80, 6.66, 3.17, 5.79, 8.00, 3.48, 6.39, 9.04}},
	    {"pemsd4", {1.23, 2.53, 2.37, 1.82, 3.47, 3.69, 1.84, 3.86, 3.93, 2.13, 4.45, 4.69}},
	    {"pemsd8", {1.03, 2.08, 1.86, 1.39, 2.80, 2.67, 1.62, 3.28, 3.20, 1.74, 3.57, 3.50}},
	};
	const auto it = published.find(preset);
	if (it == published.end()) {
		return std::nullopt;
	}
	ForecastReport r;
	r.label = "published (" + preset + ")";
	for (std::size_t i = 0; i < 4; ++i) {
		HorizonMetrics h;
		h.step = 3 * (i + 1);
		h.minutes = static_cast<int>(15 * (i + 1));
		h.values.mae = it->second[3 * i];
		h.values.rmse = it->second[3 * i + 1];
		h.values.mape = it->second[3 * i + 2];
		r.horizons.push_back(h);
	}
	return r;
}

} // namespace sstgnn
