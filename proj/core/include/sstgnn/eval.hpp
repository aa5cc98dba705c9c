#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sstgnn/data.hpp"
#include "sstgnn/encoding.hpp"
#include "sstgnn/graph.hpp"
#include "sstgnn/model.hpp"

namespace sstgnn {

struct MetricValues {
	double mae = 0.0;
	double rmse = 0.0;
	/// Percent; empty when every truth value fell below the mask floor.
	std::optional<double> mape;
	std::size_t count = 0;
	/// Entries excluded from MAPE because |truth| < mask_floor.
	std::size_t masked = 0;
};

/// MAE and RMSE over all entries; MAPE over entries with |truth| >= mask_floor.
MetricValues metrics(std::span<const double> pred, std::span<const double> truth, double mask_floor = 1.0);
MetricValues metrics(const Tensor &pred, const Tensor &truth, double mask_floor = 1.0);

struct HorizonMetrics {
	std::size_t step = 0;
	int minutes = 0;
	MetricValues values;
};

struct ForecastReport {
	std::string label;
	std::vector<HorizonMetrics> horizons;

	const HorizonMetrics *at_step(std::size_t step) const;
};

inline const std::vector<std::size_t> default_report_steps{3, 6, 9, 12};

/// Mean of the P previous days at each target's clock slot, in raw units: [nodes x horizons].
Tensor baseline_historical_average(const SpeedSeries &raw, const WindowSpec &spec, std::size_t start);

struct PredictionRow {
	std::int64_t time_index = 0; // sample index of the predicted value
	std::size_t sensor = 0;
	std::size_t horizon_step = 0;
	double truth = 0.0;
	double prediction = 0.0;
};

struct Evaluation {
	ForecastReport report;
	std::vector<PredictionRow> rows;
};

/// Runs the model over `starts` of the normalized series, denormalizes, and
/// scores against the raw series at each reported step.
Evaluation evaluate_model(SstGnn &model, const SpeedSeries &raw, const SpeedSeries &normalized,
                          const Normalizer &normalizer, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
                          const std::vector<std::size_t> &starts, const std::vector<std::size_t> &report_steps,
                          double mask_floor = 1.0, std::size_t batch_size = 64);

Evaluation evaluate_historical_average(const SpeedSeries &raw, const WindowSpec &spec,
                                       const std::vector<std::size_t> &starts,
                                       const std::vector<std::size_t> &report_steps, double mask_floor = 1.0);

/// `time_index,sensor,horizon_step,truth,prediction`, shortest round-trip floats.
void write_predictions_csv(const std::vector<PredictionRow> &rows, const std::filesystem::path &path);

std::string format_report(const ForecastReport &report);
void write_report_json(const std::vector<ForecastReport> &reports, const std::filesystem::path &path);

/// Published per-horizon results for the PeMS presets, for side-by-side
/// display only; empty for unknown names.
std::optional<ForecastReport> reference_report(const std::string &preset);

} // namespace sstgnn
