#include "sstgnn/model.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "sstgnn/errors.hpp"

namespace sstgnn {

std::string to_string(BranchMode mode) {
	switch (mode) {
	case BranchMode::historical:
		return "historical";
	case BranchMode::current:
		return "current";
	case BranchMode::both:
		return "both";
	}
	return "both";
}

BranchMode parse_branch_mode(const std::string &s) {
	if (s == "historical") {
		return BranchMode::historical;
	}
	if (s == "current") {
		return BranchMode::current;
	}
	if (s == "both") {
		return BranchMode::both;
	}
	throw ConfigError("unknown branch selection '" + s + "' (expected historical, current or both)");
}

void ModelConfig::validate() const {
	if (window < 1 || max_hop < 1 || hidden_dim < 1 || final_dim < 1 || head_dim < 1) {
		throw ConfigError("model widths, window and max hop must all be at least 1");
	}
	if (horizons.empty()) {
		throw ConfigError("model needs at least one output horizon");
	}
	for (auto h : horizons) {
		if (h < 1) {
			throw ConfigError("horizon steps must be positive");
		}
	}
	if (uses_historical() && history_days < 1) {
		throw ConfigError("the historical branch needs at least one history day");
	}
}

WindowSpec ModelConfig::window_spec(std::size_t stride) const {
	WindowSpec spec;
	spec.T = window;
	spec.P = history_days;
	spec.horizons = horizons;
	spec.stride = stride;
	return spec;
}

Batch make_batch(std::span<const SampleWindow> windows) {
	if (windows.empty()) {
		throw ContractError("make_batch: no windows");
	}
	const auto &first = windows.front();
	const std::size_t n = first.current_x.dim(0);
	const std::size_t T = first.current_x.dim(1);
	const std::size_t P = first.historical_x.dim(2);
	const std::size_t H = first.target.cols();
	const std::size_t B = windows.size();

	Batch batch;
	batch.n_nodes = n;
	batch.size = B;
	batch.current.assign(T, Tensor({B * n, 1}));
	batch.historical.assign(T, Tensor({B * n, P}));
	batch.target = Tensor({B * n, H});
	for (std::size_t b = 0; b < B; ++b) {
		const auto &w = windows[b];
		if (w.current_x.dim(0) != n || w.current_x.dim(1) != T || w.historical_x.dim(2) != P || w.target.cols() != H) {
			throw DimensionError("make_batch: windows have inconsistent shapes");
		}
		batch.time_indices.push_back(w.time_indices);
		batch.starts.push_back(w.start);
		for (std::size_t u = 0; u < n; ++u) {
			const std::size_t row = b * n + u;
			for (std::size_t t = 0; t < T; ++t) {
				batch.current[t](row, 0) = w.current_x.at(u, t, 0);
				for (std::size_t p = 0; p < P; ++p) {
					batch.historical[t](row, p) = w.historical_x.at(u, t, p);
				}
			}
			for (std::size_t h = 0; h < H; ++h) {
				batch.target(row, h) = w.target(u, h);
			}
		}
	}
	return batch;
}

std::vector<std::vector<double>> positional_rows(const Batch &batch, const PositionalEncoder &encoder) {
	const std::size_t T = batch.current.size();
	std::vector<std::vector<double>> pe(T, std::vector<double>(batch.rows()));
	for (std::size_t b = 0; b < batch.size; ++b) {
		for (std::size_t t = 0; t < T; ++t) {
			const double v = encoder.encode(batch.time_indices[b][t]);
			for (std::size_t u = 0; u < batch.n_nodes; ++u) {
				pe[t][b * batch.n_nodes + u] = v;
			}
		}
	}
	return pe;
}

Var spatial_aggregate(Var x_t, const HopNeighborhoods &hops, std::span<const Var> hop_weights) {
	if (hop_weights.size() != hops.max_hop()) {
		throw DimensionError("spatial_aggregate: " + std::to_string(hop_weights.size()) + " hop weights for K = " +
		                     std::to_string(hops.max_hop()));
	}
	Var total{};
	for (std::size_t k = 1; k <= hops.max_hop(); ++k) {
		const Var term = matmul(sparse_mix(hops.aggregator(k), x_t), hop_weights[k - 1]);
		total = k == 1 ? term : add(total, term);
	}
	return total;
}

Var temporal_aggregate(Tape &tape, std::span<const Var> prior, std::span<const Var> weights, std::size_t rows,
                       std::size_t hidden) {
	if (weights.size() < prior.size()) {
		throw DimensionError("temporal_aggregate: fewer weights than prior embeddings");
	}
	if (prior.empty()) {
		return tape.constant(Tensor({rows, hidden}));
	}
	Var acc = matmul(prior[0], weights[0]);
	for (std::size_t i = 1; i < prior.size(); ++i) {
		acc = add(acc, matmul(prior[i], weights[i]));
	}
	return relu(acc);
}

Var st_embed(Var x_t, Var spatial, Var temporal, Var w_combine, std::vector<double> pe_rows) {
	const Var parts[] = {x_t, spatial, temporal};
	return add_row_scalars(relu(matmul(concat(parts, 1), w_combine)), std::move(pe_rows));
}

std::vector<Var> branch_forward(Tape &tape, std::span<const Tensor> features, std::span<const std::vector<double>> pe,
                                const HopNeighborhoods &hops, const BranchVars &vars) {
	const std::size_t T = features.size();
	if (pe.size() != T || vars.spatial.size() != T || vars.combine.size() != T || vars.temporal.size() + 1 < T) {
		throw DimensionError("branch_forward: inconsistent number of timestamps");
	}
	std::vector<Var> z;
	z.reserve(T);
	Var running{};
	for (std::size_t t = 0; t < T; ++t) {
		const Var x = tape.constant(features[t]);
		const Var s = spatial_aggregate(x, hops, vars.spatial[t]);
		const std::size_t hidden = vars.combine[t].value().cols();
		const Var ztilde = t == 0 ? tape.constant(Tensor({features[t].rows(), hidden})) : relu(running);
		z.push_back(st_embed(x, s, ztilde, vars.combine[t], pe[t]));
		if (t + 1 < T) {
			const Var term = matmul(z.back(), vars.temporal[t]);
			running = t == 0 ? term : add(running, term);
		}
	}
	return z;
}

Var final_embed_and_predict(std::span<const Var> historical, std::span<const Var> current, const HeadVars &head,
                            Var *final_embedding) {
	std::vector<Var> parts;
	parts.reserve(historical.size() + current.size());
	parts.insert(parts.end(), historical.begin(), historical.end());
	parts.insert(parts.end(), current.begin(), current.end());
	if (parts.empty()) {
		throw ContractError("final_embed_and_predict: no embeddings");
	}
	const Var combined = concat(parts, 1);
	if (combined.value().cols() != head.final_proj.value().rows()) {
		throw ContractError("final_embed_and_predict: " + std::to_string(combined.value().cols()) +
		                    " embedding columns but projection expects " +
		                    std::to_string(head.final_proj.value().rows()));
	}
	const Var zf = matmul(combined, head.final_proj);
	if (final_embedding != nullptr) {
		*final_embedding = zf;
	}
	const Var hidden = relu(add_row_bias(matmul(zf, head.w1), head.b1));
	return add_row_bias(matmul(hidden, head.w2), head.b2);
}

SstGnn::SstGnn(ModelConfig config) : config_(std::move(config)) {
	config_.validate();
	if (config_.history_days >= 1) {
		add_branch(historical_, "hist", config_.history_days);
	}
	add_branch(current_, "cur", 1);
	const std::size_t T = config_.window;
	const std::size_t d_h = config_.hidden_dim;
	final_proj_ = params_.add("head.final", Tensor({config_.enabled_branches() * T * d_h, config_.final_dim}));
	w1_ = params_.add("head.w1", Tensor({config_.final_dim, config_.head_dim}));
	b1_ = params_.add("head.b1", Tensor({1, config_.head_dim}));
	w2_ = params_.add("head.w2", Tensor({config_.head_dim, config_.n_out()}));
	b2_ = params_.add("head.b2", Tensor({1, config_.n_out()}));
}

void SstGnn::add_branch(BranchLayout &layout, const std::string &prefix, std::size_t d_in) {
	const std::size_t T = config_.window;
	const std::size_t K = config_.max_hop;
	const std::size_t d_h = config_.hidden_dim;
	layout.spatial.assign(T, {});
	layout.combine.assign(T, 0);
	for (std::size_t t = 0; t < T; ++t) {
		if (config_.share_weights && t > 0) {
			layout.spatial[t] = layout.spatial[0];
			layout.combine[t] = layout.combine[0];
			continue;
		}
		const std::string ts = config_.share_weights ? "" : ".t" + std::to_string(t + 1);
		for (std::size_t k = 1; k <= K; ++k) {
			layout.spatial[t].push_back(
			    params_.add(prefix + ".spatial" + ts + ".k" + std::to_string(k), Tensor({d_in, d_h})));
		}
		layout.combine[t] = params_.add(prefix + ".combine" + ts, Tensor({d_in + 2 * d_h, d_h}));
	}
	for (std::size_t i = 0; i + 1 < T; ++i) {
		layout.temporal.push_back(params_.add(prefix + ".temporal.i" + std::to_string(i + 1), Tensor({d_h, d_h})));
	}
}

void SstGnn::initialize(std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<double> unit(-1.0, 1.0);
	for (auto &p : params_) {
		const auto &shape = p->value.shape();
		const bool bias = p->id.ends_with(".b1") || p->id.ends_with(".b2");
		if (bias) {
			p->value.fill(0.0);
		} else {
			const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
			for (auto &v : p->value.values()) {
				v = bound * unit(rng);
			}
		}
		p->zero_grad();
	}
}

BranchVars SstGnn::bind(Tape &tape, const BranchLayout &layout) {
	std::unordered_map<std::size_t, Var> cache;
	auto leaf = [&](std::size_t idx) {
		auto it = cache.find(idx);
		if (it == cache.end()) {
			it = cache.emplace(idx, tape.parameter(params_[idx])).first;
		}
		return it->second;
	};
	BranchVars vars;
	for (const auto &per_t : layout.spatial) {
		std::vector<Var> ks;
		for (auto idx : per_t) {
			ks.push_back(leaf(idx));
		}
		vars.spatial.push_back(std::move(ks));
	}
	for (auto idx : layout.temporal) {
		vars.temporal.push_back(leaf(idx));
	}
	for (auto idx : layout.combine) {
		vars.combine.push_back(leaf(idx));
	}
	return vars;
}

Var SstGnn::forward(Tape &tape, const Batch &batch, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
                    EmbeddingTrace *trace) {
	const std::size_t T = config_.window;
	if (batch.current.size() != T || batch.historical.size() != T) {
		throw DimensionError("batch has " + std::to_string(batch.current.size()) + " timestamps, model expects " +
		                     std::to_string(T));
	}
	if (hops.n_nodes() != batch.n_nodes || hops.max_hop() != config_.max_hop) {
		throw DimensionError("hop structure (" + std::to_string(hops.n_nodes()) + " nodes, K = " +
		                     std::to_string(hops.max_hop()) + ") does not match batch/model");
	}
	if (config_.uses_historical() && batch.historical[0].cols() != config_.history_days) {
		throw DimensionError("batch carries " + std::to_string(batch.historical[0].cols()) +
		                     " historical channels, model expects " + std::to_string(config_.history_days));
	}
	const auto pe = positional_rows(batch, encoder);

	std::vector<Var> zh, zc;
	if (config_.uses_historical()) {
		zh = branch_forward(tape, batch.historical, pe, hops, bind(tape, historical_));
	}
	if (config_.uses_current()) {
		zc = branch_forward(tape, batch.current, pe, hops, bind(tape, current_));
	}
	HeadVars head{tape.parameter(params_[final_proj_]), tape.parameter(params_[w1_]), tape.parameter(params_[b1_]),
	              tape.parameter(params_[w2_]), tape.parameter(params_[b2_])};
	Var zf{};
	const Var out = final_embed_and_predict(zh, zc, head, &zf);
	if (trace != nullptr) {
		trace->historical.clear();
		trace->current.clear();
		for (auto v : zh) {
			trace->historical.push_back(v.value());
		}
		for (auto v : zc) {
			trace->current.push_back(v.value());
		}
		trace->concatenated = tape.value(tape.inputs(zf.index)[0]);
		trace->final_embedding = zf.value();
		trace->predictions = out.value();
	}
	return out;
}

Tensor SstGnn::predict(const Batch &batch, const HopNeighborhoods &hops, const PositionalEncoder &encoder,
                       EmbeddingTrace *trace) {
	Tape tape;
	return forward(tape, batch, hops, encoder, trace).value();
}

std::vector<std::size_t> SstGnn::branch_parameter_indices(BranchMode branch) const {
	const std::string prefix = branch == BranchMode::historical ? "hist." : "cur.";
	std::vector<std::size_t> out;
	for (std::size_t i = 0; i < params_.size(); ++i) {
		if (params_[i].id.starts_with(prefix)) {
			out.push_back(i);
		}
	}
	return out;
}

void SstGnn::load_values(const ParameterSet &other) {
	if (other.size() != params_.size()) {
		throw DimensionError("parameter count mismatch: " + std::to_string(other.size()) + " vs " +
		                     std::to_string(params_.size()));
	}
	for (std::size_t i = 0; i < params_.size(); ++i) {
		const std::size_t j = other.index_of(params_[i].id);
		if (other[j].value.shape() != params_[i].value.shape()) {
			throw DimensionError("parameter '" + params_[i].id + "' has shape " + to_string(other[j].value.shape()) +
			                     ", expected " + to_string(params_[i].value.shape()));
		}
		params_[i].value = other[j].value;
	}
}

} // namespace sstgnn
