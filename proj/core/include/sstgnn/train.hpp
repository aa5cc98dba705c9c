#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/checkpoint.hpp"
#include "sstgnn/data.hpp"
#include "sstgnn/encoding.hpp"
#include "sstgnn/graph.hpp"
#include "sstgnn/model.hpp"

namespace sstgnn {

struct AdamConfig {
	double beta1 = 0.9;
	double beta2 = 0.999;
	double epsilon = 1e-8;
};

/// First/second moment estimates, one pair per parameter in set order.
struct AdamState {
	AdamConfig hyper;
	std::vector<Tensor> first;
	std::vector<Tensor> second;
	std::uint64_t step = 0;

	AdamState() = default;
	explicit AdamState(const ParameterSet &params, AdamConfig hyper = {});
};

/// One bias-corrected ADAM update over `params` in order, then zeroes all
/// gradients. Parameters whose `frozen` flag is set keep their value and
/// moments. A non-finite gradient aborts with a NumericalError naming the
/// parameter, before anything is modified.
void adam_step(ParameterSet &params, AdamState &state, double lr, const std::vector<bool> &frozen = {});

struct TrainConfig {
	double lr0 = 0.001;
	double decay_rate = 0.5;
	std::size_t decay_every = 7;
	std::size_t epochs = 500;
	/// Windows per minibatch; 0 trains full-batch.
	std::size_t batch_size = 32;
	std::uint64_t seed = 1;
	bool shuffle = true;
	/// Keep the parameters with the lowest validation MSE instead of the last ones.
	bool select_best = true;
	/// When non-empty, only parameters whose id starts with one of these are updated.
	std::vector<std::string> trainable_prefixes;
	AdamConfig adam;
};

/// lr0 * decay_rate^floor(epoch / decay_every)
double lr_at(const TrainConfig &config, std::size_t epoch);

struct LossRecord {
	std::size_t epoch = 0;
	double train_mse = 0.0;
	double val_mse = std::numeric_limits<double>::quiet_NaN();
	double lr = 0.0;
};

/// Normalized series plus the window starts for each split.
struct TrainData {
	const SpeedSeries *series = nullptr;
	const HopNeighborhoods *hops = nullptr;
	PositionalEncoder encoder;
	WindowSpec spec;
	std::vector<std::size_t> train_starts;
	std::vector<std::size_t> val_starts;
};

/// Optimizer and selection state needed to continue a run exactly.
struct TrainState {
	AdamState adam;
	std::size_t next_epoch = 0;
	ParameterSet best;
	double best_val = std::numeric_limits<double>::infinity();
	std::size_t best_epoch = 0;
	bool has_best = false;
};

struct TrainResult {
	std::vector<LossRecord> history;
	TrainState state;
	bool diverged = false;
	std::string message;
};

using EpochCallback = std::function<void(const LossRecord &)>;

/// Seeded shuffle, minibatch forward/backward/ADAM, and per-epoch
/// validation. On return the model holds the last-epoch parameters and
/// `state.best` the selected ones. A non-finite training loss stops the
/// run with `diverged` set; `state.best` keeps the last good selection.
TrainResult train_loop(SstGnn &model, const TrainData &data, const TrainConfig &config,
                       std::optional<TrainState> resume = std::nullopt, const EpochCallback &on_epoch = {});

/// Mean MSE over the given windows, evaluated in batches without gradients.
double dataset_mse(SstGnn &model, const TrainData &data, const std::vector<std::size_t> &starts,
                   std::size_t batch_size = 64);

/// Builds a batch from the listed starts of the (normalized) series.
Batch batch_from_starts(const SpeedSeries &series, const WindowSpec &spec, std::span<const std::size_t> starts);

/// Stores / restores TrainState in checkpoint extras.
void pack_train_state(const TrainState &state, const ParameterSet &params, Checkpoint &ckpt);
TrainState unpack_train_state(const Checkpoint &ckpt);

void write_loss_history_csv(const std::vector<LossRecord> &history, const std::filesystem::path &path);

} // namespace sstgnn
