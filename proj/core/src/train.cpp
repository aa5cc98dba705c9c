#include "sstgnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "sstgnn/errors.hpp"

namespace sstgnn {

AdamState::AdamState(const ParameterSet &params, AdamConfig hyper_) : hyper(hyper_) {
	for (const auto &p : params) {
		first.emplace_back(p->value.shape());
		second.emplace_back(p->value.shape());
	}
}

void adam_step(ParameterSet &params, AdamState &state, double lr, const std::vector<bool> &frozen) {
	if (state.first.size() != params.size() || state.second.size() != params.size()) {
		throw ContractError("adam_step: optimizer state does not match parameter set");
	}
	for (const auto &p : params) {
		if (!p->grad.all_finite()) {
			throw NumericalError("non-finite gradient in parameter '" + p->id + "'");
		}
	}
	++state.step;
	const auto &h = state.hyper;
	const double t = static_cast<double>(state.step);
	const double c1 = 1.0 - std::pow(h.beta1, t);
	const double c2 = 1.0 - std::pow(h.beta2, t);
	for (std::size_t i = 0; i < params.size(); ++i) {
		Parameter &p = params[i];
		if (!frozen.empty() && frozen[i]) {
			p.zero_grad();
			continue;
		}
		Tensor &m = state.first[i];
		Tensor &v = state.second[i];
		for (std::size_t j = 0; j < p.value.size(); ++j) {
			const double g = p.grad[j];
			m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g;
			v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
			p.value[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + h.epsilon);
		}
		p.zero_grad();
	}
}

double lr_at(const TrainConfig &config, std::size_t epoch) {
	const std::size_t every = std::max<std::size_t>(config.decay_every, 1);
	return config.lr0 * std::pow(config.decay_rate, static_cast<double>(epoch / every));
}

Batch batch_from_starts(const SpeedSeries &series, const WindowSpec &spec, std::span<const std::size_t> starts) {
	std::vector<SampleWindow> windows;
	windows.reserve(starts.size());
	for (auto s : starts) {
		windows.push_back(make_window(series, spec, s));
	}
	return make_batch(windows);
}

double dataset_mse(SstGnn &model, const TrainData &data, const std::vector<std::size_t> &starts,
                   std::size_t batch_size) {
	if (starts.empty()) {
		return std::numeric_limits<double>::quiet_NaN();
	}
	batch_size = std::max<std::size_t>(batch_size, 1);
	double sum = 0.0;
	std::size_t count = 0;
	for (std::size_t b = 0; b < starts.size(); b += batch_size) {
		const std::size_t e = std::min(starts.size(), b + batch_size);
		const Batch batch = batch_from_starts(*data.series, data.spec, std::span(starts).subspan(b, e - b));
		const Tensor pred = model.predict(batch, *data.hops, data.encoder);
		sum += mse(pred, batch.target) * static_cast<double>(pred.size());
		count += pred.size();
	}
	return sum / static_cast<double>(count);
}

namespace {

std::vector<bool> frozen_mask(const ParameterSet &params, const std::vector<std::string> &trainable) {
	std::vector<bool> frozen(params.size(), false);
	if (trainable.empty()) {
		return frozen;
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		frozen[i] = std::none_of(trainable.begin(), trainable.end(),
		                         [&](const std::string &prefix) { return params[i].id.starts_with(prefix); });
	}
	return frozen;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
	std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(epoch) + 1);
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
	return z ^ (z >> 31);
}

} // namespace

TrainResult train_loop(SstGnn &model, const TrainData &data, const TrainConfig &config, std::optional<TrainState> resume,
                       const EpochCallback &on_epoch) {
	if (data.series == nullptr || data.hops == nullptr) {
		throw ContractError("train_loop: series and hop structure are required");
	}
	if (data.train_starts.empty()) {
		throw DataError("training split contains no windows");
	}
	if (!(config.lr0 > 0.0)) {
		throw ConfigError("initial learning rate must be positive");
	}
	auto &params = model.params();
	TrainResult result;
	if (resume) {
		result.state = std::move(*resume);
		if (result.state.adam.first.size() != params.size()) {
			throw DataError("resume state does not match the model's parameters");
		}
	} else {
		result.state.adam = AdamState(params, config.adam);
	}
	TrainState &state = result.state;
	if (!state.has_best) {
		state.best = params.clone();
	}
	const auto frozen = frozen_mask(params, config.trainable_prefixes);
	const std::size_t batch_size = config.batch_size == 0 ? data.train_starts.size() : config.batch_size;
	params.zero_grads();

	std::vector<std::size_t> order = data.train_starts;
	for (std::size_t epoch = state.next_epoch; epoch < config.epochs; ++epoch) {
		const double lr = lr_at(config, epoch);
		order = data.train_starts;
		if (config.shuffle) {
			std::mt19937_64 gen(epoch_seed(config.seed, epoch));
			std::shuffle(order.begin(), order.end(), gen);
		}
		double loss_sum = 0.0;
		std::size_t loss_count = 0;
		for (std::size_t b = 0; b < order.size(); b += batch_size) {
			const std::size_t e = std::min(order.size(), b + batch_size);
			const Batch batch = batch_from_starts(*data.series, data.spec, std::span(order).subspan(b, e - b));
			Tape tape;
			const Var pred = model.forward(tape, batch, *data.hops, data.encoder);
			const Var loss = mse(pred, batch.target);
			const double value = loss.value()[0];
			if (!std::isfinite(value)) {
				result.diverged = true;
				result.message = "training loss became non-finite in epoch " + std::to_string(epoch);
				return result;
			}
			tape.backward(loss);
			try {
				adam_step(params, state.adam, lr, frozen);
			} catch (const NumericalError &err) {
				result.diverged = true;
				result.message = std::string(err.what()) + " in epoch " + std::to_string(epoch);
				return result;
			}
			loss_sum += value * static_cast<double>(pred.value().size());
			loss_count += pred.value().size();
		}

		LossRecord rec;
		rec.epoch = epoch;
		rec.lr = lr;
		rec.train_mse = loss_sum / static_cast<double>(loss_count);
		rec.val_mse = dataset_mse(model, data, data.val_starts);
		result.history.push_back(rec);
		state.next_epoch = epoch + 1;

		const double score = data.val_starts.empty() ? rec.train_mse : rec.val_mse;
		if (!config.select_best || !state.has_best || score < state.best_val) {
			state.best = params.clone();
			state.best_val = score;
			state.best_epoch = epoch;
			state.has_best = true;
		}
		if (on_epoch) {
			on_epoch(rec);
		}
	}
	return result;
}

void pack_train_state(const TrainState &state, const ParameterSet &params, Checkpoint &ckpt) {
	auto &x = ckpt.extra;
	x["adam.step"] = Tensor::scalar(static_cast<double>(state.adam.step));
	x["adam.beta1"] = Tensor::scalar(state.adam.hyper.beta1);
	x["adam.beta2"] = Tensor::scalar(state.adam.hyper.beta2);
	x["adam.epsilon"] = Tensor::scalar(state.adam.hyper.epsilon);
	x["train.next_epoch"] = Tensor::scalar(static_cast<double>(state.next_epoch));
	x["train.best_val"] = Tensor::scalar(state.best_val);
	x["train.best_epoch"] = Tensor::scalar(static_cast<double>(state.best_epoch));
	x["train.has_best"] = Tensor::scalar(state.has_best ? 1.0 : 0.0);
	for (std::size_t i = 0; i < params.size(); ++i) {
		const auto &id = params[i].id;
		if (i < state.adam.first.size()) {
			x["adam.m." + id] = state.adam.first[i];
			x["adam.v." + id] = state.adam.second[i];
		}
		if (state.has_best) {
			x["best." + id] = state.best[state.best.index_of(id)].value;
		}
	}
}

TrainState unpack_train_state(const Checkpoint &ckpt) {
	const auto &x = ckpt.extra;
	auto need = [&](const std::string &key) -> const Tensor & {
		const auto it = x.find(key);
		if (it == x.end()) {
			throw DataError("checkpoint has no training state entry '" + key + "'");
		}
		return it->second;
	};
	TrainState state;
	state.adam.step = static_cast<std::uint64_t>(need("adam.step")[0]);
	state.adam.hyper.beta1 = need("adam.beta1")[0];
	state.adam.hyper.beta2 = need("adam.beta2")[0];
	state.adam.hyper.epsilon = need("adam.epsilon")[0];
	state.next_epoch = static_cast<std::size_t>(need("train.next_epoch")[0]);
	state.best_val = need("train.best_val")[0];
	state.best_epoch = static_cast<std::size_t>(need("train.best_epoch")[0]);
	state.has_best = need("train.has_best")[0] != 0.0;
	for (const auto &p : ckpt.params) {
		state.adam.first.push_back(need("adam.m." + p->id));
		state.adam.second.push_back(need("adam.v." + p->id));
		if (state.has_best) {
			state.best.add(p->id, need("best." + p->id));
		}
	}
	return state;
}

void write_loss_history_csv(const std::vector<LossRecord> &history, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write '" + path.string() + "'");
	}
	out.precision(17);
	out << "epoch,train_mse,val_mse,lr\n";
	for (const auto &r : history) {
		out << r.epoch << ',' << r.train_mse << ',' << r.val_mse << ',' << r.lr << '\n';
	}
}

} // namespace sstgnn
