#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sstgnn/graph.hpp"
#include "sstgnn/tensor.hpp"

namespace sstgnn {

/// Speed readings, one row per sample and one column per sensor.
struct SpeedSeries {
	Tensor values; // [timesteps x nodes]
	int samples_per_hour = 12;
	std::vector<std::string> sensor_ids;

	std::size_t num_timesteps() const { return values.rows(); }
	std::size_t n_nodes() const { return values.cols(); }
	std::size_t day_length() const { return 24 * static_cast<std::size_t>(samples_per_hour); }
	int interval_minutes() const { return 60 / samples_per_hour; }
	double at(std::size_t t, std::size_t node) const { return values(t, node); }
};

enum class MissingPolicy {
	reject,
	/// Fill gaps from the previous reading of the same sensor and day; a
	/// sensor with a fully empty day is still an error.
	forward_fill,
};

/// Loads a rectangular numeric table. A first row that is not numeric is
/// taken as sensor ids.
SpeedSeries load_speed_csv(const std::filesystem::path &path, int samples_per_hour = 12,
                           MissingPolicy missing = MissingPolicy::reject);
/// Writes values with shortest round-trip formatting, so load reproduces them bit-exactly.
void save_speed_csv(const SpeedSeries &series, const std::filesystem::path &path);

struct WindowSpec {
	std::size_t T = 12;
	/// Historical days; P = 0 disables historical channels.
	std::size_t P = 7;
	/// Target steps ahead of the last input sample (1 = next sample).
	std::vector<std::size_t> horizons{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
	std::size_t stride = 1;

	std::size_t max_horizon() const;
};

/// One training or evaluation instance starting at sample `start`.
struct SampleWindow {
	std::size_t start = 0;
	Tensor current_x;                       // [nodes x T x 1]
	Tensor historical_x;                    // [nodes x T x P], channel p-1 is p days back
	std::vector<std::int64_t> time_indices; // T consecutive sample indices
	Tensor target;                          // [nodes x horizons]
};

/// First start whose every historical offset is in range.
std::size_t first_window_start(const WindowSpec &spec, std::size_t day_length);

/// All valid window starts in [P*day, len - T - max_horizon], stepping by stride.
std::vector<std::size_t> window_starts(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec);

SampleWindow make_window(const SpeedSeries &series, const WindowSpec &spec, std::size_t start);

/// Materializes every window; returns an empty list (with a warning on
/// stderr) when the series is too short.
std::vector<SampleWindow> make_windows(const SpeedSeries &series, const WindowSpec &spec);

/// Half-open range of window start positions.
struct IndexRange {
	std::size_t begin = 0;
	std::size_t end = 0;

	bool empty() const noexcept { return begin >= end; }
	bool contains(std::size_t s) const noexcept { return s >= begin && s < end; }
};

/// Temporal split. A window belongs to the split whose row range contains
/// all of its target rows.
struct DatasetSplit {
	std::size_t train_row_end = 0;
	std::size_t val_row_end = 0;
	std::size_t num_rows = 0;
	/// First row ever used as a current-day input or a target.
	std::size_t first_model_row = 0;
	IndexRange train;
	IndexRange val;
	IndexRange test;

	/// Window starts inside `range` that lie on the stride grid.
	std::vector<std::size_t> starts(const IndexRange &range, const WindowSpec &spec) const;
};

DatasetSplit split_by_days(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec,
                           std::size_t train_days, std::size_t val_days);
DatasetSplit split_by_fraction(std::size_t num_timesteps, std::size_t day_length, const WindowSpec &spec,
                               double train_fraction, double val_fraction);

enum class NormalizerMode { global, per_sensor };

/// z-score statistics; one entry (global) or one per sensor.
struct Normalizer {
	std::vector<double> mean{0.0};
	std::vector<double> stddev{1.0};

	double apply(double v, std::size_t node) const;
	double invert(double v, std::size_t node) const;
	SpeedSeries apply(const SpeedSeries &series) const;
	/// Inverts a [rows x cols] tensor whose row r belongs to node r % n_nodes.
	Tensor invert_rows(const Tensor &t, std::size_t n_nodes) const;
};

/// Fits on rows [first_model_row, train_row_end) only.
Normalizer fit_normalizer(const SpeedSeries &series, const DatasetSplit &split,
                          NormalizerMode mode = NormalizerMode::global);

struct SynthConfig {
	std::size_t n_nodes = 10;
	std::size_t n_days = 14;
	std::uint64_t seed = 1;
	/// Stationary standard deviation of the AR(1) disturbance, in mph.
	double noise_std = 3.0;
	/// Per-sample autocorrelation of the disturbance.
	double noise_persistence = 0.97;
	int samples_per_hour = 12;
};

struct SyntheticDataset {
	SpeedSeries series;
	DistanceTable distances;
};

/// Desk-scale stand-in for a PeMS district: sensors strung along a
/// corridor with daily rush-hour dips, a weekday/weekend cycle, and a
/// spatially smoothed AR(1) disturbance. Deterministic in the seed; with
/// noise_std = 0 the series repeats exactly every week.
SyntheticDataset synthesize(const SynthConfig &config);

} // namespace sstgnn
