#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>

#include <CLI11.hpp>

#include "cli/run_config.hpp"
#include "sstgnn/checkpoint.hpp"
#include "sstgnn/data.hpp"
#include "sstgnn/errors.hpp"
#include "sstgnn/eval.hpp"
#include "sstgnn/gradcheck.hpp"
#include "sstgnn/graph.hpp"
#include "sstgnn/model.hpp"
#include "sstgnn/train.hpp"

namespace fs = std::filesystem;

namespace sstgnn::cli {

namespace {

/// Flag storage for one subcommand; only flags actually given override the config.
class FieldBinding {
public:
	void attach(CLI::App &app, const std::vector<std::string> &sections, const std::vector<std::string> &keys = {}) {
		const auto &fields = config_fields();
		for (std::size_t i = 0; i < fields.size(); ++i) {
			const auto &f = fields[i];
			const bool in_section = std::find(sections.begin(), sections.end(), f.section) != sections.end();
			const bool listed = std::find(keys.begin(), keys.end(), f.section + "." + f.key) != keys.end();
			if (!in_section && !listed) {
				continue;
			}
			auto &slot = values_[i];
			options_[i] = app.add_option(f.flag, slot, f.help + " [" + f.section + "] " + f.key)->type_name("VALUE");
		}
	}

	void apply(RunConfig &config) const {
		const auto &fields = config_fields();
		for (const auto &[i, opt] : options_) {
			if (opt->count() == 0) {
				continue;
			}
			try {
				fields[i].set(config, values_.at(i));
			} catch (const std::exception &e) {
				throw ConfigError(fields[i].flag + ": " + e.what());
			}
		}
	}

private:
	std::map<std::size_t, std::string> values_;
	std::map<std::size_t, CLI::Option *> options_;
};

struct Common {
	std::string config_file;
	std::string out_dir;
	FieldBinding fields;
};

void add_common(CLI::App &app, Common &common) {
	app.add_option("--config", common.config_file, "config file with [section] key = value lines");
	app.add_option("--out", common.out_dir, "output directory (default: $SSTGNN_OUT_DIR or ./sstgnn_out)");
}

RunConfig resolve(const Common &common, RunConfig config) {
	if (!common.config_file.empty()) {
		apply_config_file(config, common.config_file);
	}
	common.fields.apply(config);
	config.out_dir = common.out_dir.empty() ? default_out_dir() : common.out_dir;
	fs::create_directories(config.out_dir);
	return config;
}

fs::path out_path(const RunConfig &config, const std::string &name) {
	return fs::path(config.out_dir) / name;
}

struct Prepared {
	SpeedSeries raw;
	SpeedSeries normalized;
	SensorGraph graph{0};
	HopNeighborhoods hops;
	DatasetSplit split;
	Normalizer normalizer;
	PositionalEncoder encoder = PositionalEncoder();
	WindowSpec spec;
};

SpeedSeries load_series(const RunConfig &config) {
	if (config.speeds.empty()) {
		throw ConfigError("no speed file given (--speeds or [data] speeds)");
	}
	return load_speed_csv(config.speeds, config.samples_per_hour,
	                      config.missing == "forward_fill" ? MissingPolicy::forward_fill : MissingPolicy::reject);
}

SensorGraph load_graph(const RunConfig &config, std::size_t n_nodes) {
	if (config.distances.empty()) {
		throw ConfigError("no distance file given (--distances or [data] distances)");
	}
	std::optional<fs::path> id_map;
	if (!config.id_map.empty()) {
		id_map = config.id_map;
	}
	const auto table = load_distance_csv(config.distances, id_map);
	return build_adjacency(table, n_nodes, config.delta, config.epsilon, config.distance_scale);
}

DatasetSplit make_split(const RunConfig &config, std::size_t rows, std::size_t day, const WindowSpec &spec) {
	if (config.train_days > 0) {
		const std::size_t days = rows / day;
		if (config.train_days >= days) {
			throw ConfigError("train_days = " + std::to_string(config.train_days) + " leaves no validation/test days in a " +
			                  std::to_string(days) + "-day series");
		}
		const std::size_t val_days = config.val_days > 0 ? config.val_days : (days - config.train_days) / 2;
		return split_by_days(rows, day, spec, config.train_days, val_days);
	}
	return split_by_fraction(rows, day, spec, config.train_fraction, config.val_fraction);
}

Prepared prepare(const RunConfig &config, const ModelConfig &model, const Normalizer *fixed,
                 std::optional<PositionalEncoder> encoder = std::nullopt) {
	Prepared p;
	p.raw = load_series(config);
	p.graph = load_graph(config, p.raw.n_nodes());
	p.hops = khop_neighborhoods(p.graph, model.max_hop);
	p.spec = model.window_spec(config.stride);
	p.split = make_split(config, p.raw.num_timesteps(), p.raw.day_length(), p.spec);
	p.normalizer = fixed != nullptr ? *fixed
	                                : fit_normalizer(p.raw, p.split,
	                                                 config.normalization == "per_sensor" ? NormalizerMode::per_sensor
	                                                                                      : NormalizerMode::global);
	if (p.normalizer.mean.size() != 1 && p.normalizer.mean.size() != p.raw.n_nodes()) {
		throw DataError("normalizer has " + std::to_string(p.normalizer.mean.size()) + " entries for " +
		                std::to_string(p.raw.n_nodes()) + " sensors");
	}
	p.normalized = p.normalizer.apply(p.raw);
	p.encoder = encoder ? *encoder : PositionalEncoder(config.samples_per_hour, config.t0_offset);
	return p;
}

const IndexRange &split_range(const Prepared &p, const std::string &name) {
	if (name == "train") {
		return p.split.train;
	}
	if (name == "val") {
		return p.split.val;
	}
	return p.split.test;
}

int cmd_synth(const RunConfig &config) {
	SynthConfig sc;
	sc.n_nodes = config.synth_nodes;
	sc.n_days = config.synth_days;
	sc.seed = config.train.seed;
	sc.noise_std = config.synth_noise;
	sc.noise_persistence = config.synth_persistence;
	sc.samples_per_hour = config.samples_per_hour;
	const auto data = synthesize(sc);
	save_speed_csv(data.series, out_path(config, "speeds.csv"));
	save_distance_csv(data.distances, out_path(config, "distances.csv"));

	std::ofstream manifest(out_path(config, "manifest.ini"));
	if (!manifest) {
		throw DataError("cannot write manifest in '" + config.out_dir + "'");
	}
	manifest << "[synth]\n"
	         << "nodes = " << sc.n_nodes << "\n"
	         << "days = " << sc.n_days << "\n"
	         << "seed = " << sc.seed << "\n"
	         << "noise = " << sc.noise_std << "\n"
	         << "persistence = " << sc.noise_persistence << "\n"
	         << "samples_per_hour = " << sc.samples_per_hour << "\n"
	         << "\n[files]\n"
	         << "speeds = speeds.csv\n"
	         << "distances = distances.csv\n"
	         << "\n[shape]\n"
	         << "timesteps = " << data.series.num_timesteps() << "\n"
	         << "sensors = " << data.series.n_nodes() << "\n"
	         << "distance_pairs = " << data.distances.entries.size() << "\n";
	// the snapshot points at the written files so it can drive train/eval directly
	RunConfig snapshot = config;
	snapshot.speeds = fs::absolute(out_path(config, "speeds.csv")).string();
	snapshot.distances = fs::absolute(out_path(config, "distances.csv")).string();
	write_config_snapshot(snapshot, out_path(config, "config.ini"));
	std::cout << "wrote " << data.series.num_timesteps() << " x " << data.series.n_nodes() << " speeds and "
	          << data.distances.entries.size() << " distance pairs to " << config.out_dir << "\n";
	return exit_ok;
}

int cmd_build_graph(const RunConfig &config, std::size_t n_nodes_flag) {
	std::size_t n = n_nodes_flag;
	if (!config.speeds.empty()) {
		n = load_series(config).n_nodes();
	} else if (!config.id_map.empty()) {
		n = load_id_map(config.id_map).size();
	}
	if (n == 0) {
		throw ConfigError("node count unknown: pass --speeds, --id-map or --num-nodes");
	}
	const SensorGraph graph = load_graph(config, n);
	const HopNeighborhoods hops = khop_neighborhoods(graph, config.model.max_hop);
	write_adjacency_csv(graph, out_path(config, "adjacency.csv"));

	std::ofstream counts(out_path(config, "hop_counts.csv"));
	counts << "node";
	for (std::size_t k = 1; k <= hops.max_hop(); ++k) {
		counts << ",hop" << k;
	}
	counts << "\n";
	std::vector<std::size_t> pairs(hops.max_hop() + 1, 0);
	for (std::size_t u = 0; u < n; ++u) {
		counts << u;
		for (std::size_t k = 1; k <= hops.max_hop(); ++k) {
			counts << "," << hops.members(k, u).size();
			pairs[k] += hops.members(k, u).size();
		}
		counts << "\n";
	}
	write_config_snapshot(config, out_path(config, "config.ini"));
	std::cout << n << " nodes, " << graph.edge_count() << " edges\n";
	for (std::size_t k = 1; k <= hops.max_hop(); ++k) {
		std::cout << "  hop " << k << ": " << pairs[k] / 2 << " node pairs\n";
	}
	return exit_ok;
}

Checkpoint make_checkpoint(const RunConfig &config, const SstGnn &model, const ParameterSet &params,
                           const Prepared &p) {
	Checkpoint ckpt;
	ckpt.config = model.config();
	ckpt.params = params.clone();
	ckpt.normalizer = p.normalizer;
	ckpt.samples_per_hour = p.encoder.samples_per_hour();
	ckpt.t0_offset = p.encoder.t0_offset();
	ckpt.seed = config.train.seed;
	return ckpt;
}

int cmd_train(RunConfig config, const std::string &resume_dir) {
	std::optional<TrainState> resume;
	std::optional<Checkpoint> last;
	if (!resume_dir.empty()) {
		last = load_checkpoint(fs::path(resume_dir) / "last.ckpt");
		if (!(last->config == config.model)) {
			std::cerr << "note: using the model configuration stored in the resumed checkpoint\n";
			config.model = last->config;
		}
		resume = unpack_train_state(*last);
	}
	const Prepared p = prepare(config, config.model, last ? &last->normalizer : nullptr);

	SstGnn model(config.model);
	if (last) {
		model.load_values(last->params);
	} else {
		model.initialize(config.train.seed);
	}

	TrainData data;
	data.series = &p.normalized;
	data.hops = &p.hops;
	data.encoder = p.encoder;
	data.spec = p.spec;
	data.train_starts = p.split.starts(p.split.train, p.spec);
	data.val_starts = p.split.starts(p.split.val, p.spec);
	std::cout << "training on " << data.train_starts.size() << " windows, validating on " << data.val_starts.size()
	          << " (" << model.params().total_elements() << " parameters)\n";

	write_config_snapshot(config, out_path(config, "config.ini"));
	const auto result = train_loop(model, data, config.train, std::move(resume), [](const LossRecord &r) {
		std::printf("epoch %4zu  train_mse %.6f  val_mse %.6f  lr %.3g\n", r.epoch, r.train_mse, r.val_mse, r.lr);
		std::fflush(stdout);
	});

	const ParameterSet &chosen = config.train.select_best ? result.state.best : model.params();
	save_checkpoint(make_checkpoint(config, model, chosen, p), out_path(config, "best.ckpt"));
	Checkpoint resume_ckpt = make_checkpoint(config, model, model.params(), p);
	pack_train_state(result.state, model.params(), resume_ckpt);
	if (!result.diverged) {
		save_checkpoint(resume_ckpt, out_path(config, "last.ckpt"));
	}
	write_loss_history_csv(result.history, out_path(config, "loss_history.csv"));

	if (result.diverged) {
		std::cerr << "error: " << result.message << "; kept the last good checkpoint\n";
		return exit_numerical;
	}
	std::cout << "best epoch " << result.state.best_epoch << " (selection MSE " << result.state.best_val << ")\n";
	return exit_ok;
}

struct Loaded {
	Checkpoint ckpt;
	Prepared prepared;
};

Loaded load_for_eval(RunConfig &config, const std::string &checkpoint) {
	if (checkpoint.empty()) {
		throw ConfigError("--checkpoint is required");
	}
	Loaded l{load_checkpoint(checkpoint), Prepared{}};
	config.model = l.ckpt.config;
	config.samples_per_hour = l.ckpt.samples_per_hour;
	config.t0_offset = l.ckpt.t0_offset;
	l.prepared = prepare(config, l.ckpt.config, &l.ckpt.normalizer,
	                     PositionalEncoder(l.ckpt.samples_per_hour, l.ckpt.t0_offset));
	return l;
}

int cmd_eval(RunConfig config, const std::string &checkpoint) {
	Loaded l = load_for_eval(config, checkpoint);
	const Prepared &p = l.prepared;
	SstGnn model = restore_model(l.ckpt);
	const auto starts = p.split.starts(split_range(p, config.split), p.spec);
	if (starts.empty()) {
		throw DataError("the " + config.split + " split has no windows");
	}
	write_config_snapshot(config, out_path(config, "config.ini"));

	std::vector<ForecastReport> reports;
	reports.push_back(evaluate_model(model, p.raw, p.normalized, p.normalizer, p.hops, p.encoder, starts,
	                                 config.report_steps, config.mask_floor, config.eval_batch)
	                      .report);
	if (p.spec.P >= 1) {
		reports.push_back(
		    evaluate_historical_average(p.raw, p.spec, starts, config.report_steps, config.mask_floor).report);
	}
	if (auto ref = reference_report(config.preset)) {
		reports.push_back(*ref);
	}
	std::ofstream text(out_path(config, "report.txt"));
	for (const auto &r : reports) {
		std::cout << format_report(r) << "\n";
		text << format_report(r) << "\n";
	}
	write_report_json(reports, out_path(config, "report.json"));
	return exit_ok;
}

int cmd_predict(RunConfig config, const std::string &checkpoint, const std::string &output) {
	Loaded l = load_for_eval(config, checkpoint);
	const Prepared &p = l.prepared;
	SstGnn model = restore_model(l.ckpt);
	const auto starts = p.split.starts(split_range(p, config.split), p.spec);
	if (starts.empty()) {
		throw DataError("the " + config.split + " split has no windows");
	}
	write_config_snapshot(config, out_path(config, "config.ini"));
	const auto ev = evaluate_model(model, p.raw, p.normalized, p.normalizer, p.hops, p.encoder, starts,
	                               config.report_steps, config.mask_floor, config.eval_batch);
	const fs::path path = output.empty() ? out_path(config, "predictions.csv") : fs::path(output);
	write_predictions_csv(ev.rows, path);
	std::cout << "wrote " << ev.rows.size() << " prediction rows to " << path.string() << "\n";
	return exit_ok;
}

int cmd_gradcheck(const RunConfig &config, std::size_t batch_windows) {
	const ModelConfig &mc = config.model;
	const std::size_t n = config.synth_nodes;
	std::mt19937_64 rng(config.train.seed);
	std::normal_distribution<double> gauss(0.0, 1.0);

	// Ring with chords so every hop up to K is populated.
	SensorGraph graph(n);
	for (std::size_t i = 0; i + 1 < n; ++i) {
		graph.add_edge(i, i + 1);
	}
	std::uniform_int_distribution<std::size_t> pick(0, n - 1);
	for (std::size_t e = 0; e < n / 3; ++e) {
		const auto a = pick(rng);
		const auto b = pick(rng);
		if (a != b) {
			graph.add_edge(a, b);
		}
	}
	const HopNeighborhoods hops = khop_neighborhoods(graph, mc.max_hop);

	std::vector<SampleWindow> windows;
	for (std::size_t b = 0; b < batch_windows; ++b) {
		SampleWindow w;
		w.start = 1000 + 37 * b;
		w.current_x = Tensor({n, mc.window, 1});
		w.historical_x = Tensor({n, mc.window, mc.history_days});
		w.target = Tensor({n, mc.n_out()});
		for (auto &v : w.current_x.values()) {
			v = gauss(rng);
		}
		for (auto &v : w.historical_x.values()) {
			v = gauss(rng);
		}
		for (auto &v : w.target.values()) {
			v = gauss(rng);
		}
		for (std::size_t t = 0; t < mc.window; ++t) {
			w.time_indices.push_back(static_cast<std::int64_t>(w.start + t));
		}
		windows.push_back(std::move(w));
	}
	const Batch batch = make_batch(windows);
	const PositionalEncoder encoder(config.samples_per_hour, config.t0_offset);

	SstGnn model(mc);
	model.initialize(config.train.seed);
	auto loss = [&] {
		Tape tape;
		return mse(model.forward(tape, batch, hops, encoder), batch.target).value()[0];
	};
	auto backward = [&] {
		Tape tape;
		tape.backward(mse(model.forward(tape, batch, hops, encoder), batch.target));
	};
	const auto r = check_gradients(model.params(), loss, backward);
	write_config_snapshot(config, out_path(config, "config.ini"));
	std::printf("checked %zu gradient entries over %zu parameters\n", r.checked, model.params().size());
	std::printf("max relative error %.3e (worst: %s[%zu]), max abs error on tiny entries %.3e\n", r.max_rel_error,
	            r.worst_param.c_str(), r.worst_index, r.max_abs_error_small);
	std::printf("%s (%zu failures)\n", r.passed() ? "PASS" : "FAIL", r.failures);
	return r.passed() ? exit_ok : exit_numerical;
}

RunConfig gradcheck_defaults() {
	RunConfig c;
	c.synth_nodes = 6;
	c.model.window = 3;
	c.model.max_hop = 2;
	c.model.history_days = 2;
	c.model.hidden_dim = 4;
	c.model.final_dim = 4;
	c.model.head_dim = 4;
	c.model.horizons = {1, 2};
	c.report_steps = {1, 2};
	return c;
}

} // namespace

int run(int argc, char **argv) {
	CLI::App app{"sstgnn: spatio-temporal graph forecaster for road-sensor speeds"};
	app.require_subcommand(1);

	Common synth_c, graph_c, train_c, eval_c, predict_c, grad_c;

	auto *synth = app.add_subcommand("synth", "write a synthetic speed/distance dataset and manifest");
	add_common(*synth, synth_c);
	synth_c.fields.attach(*synth, {"synth"}, {"data.samples_per_hour", "train.seed"});

	std::size_t num_nodes = 0;
	auto *graph = app.add_subcommand("build-graph", "build the kernel adjacency and hop structure");
	add_common(*graph, graph_c);
	graph_c.fields.attach(*graph, {"data", "graph"}, {"model.max_hop"});
	graph->add_option("--num-nodes", num_nodes, "node count when neither speeds nor id map is given");

	std::string resume;
	auto *train = app.add_subcommand("train", "train a model and write checkpoints and loss history");
	add_common(*train, train_c);
	train_c.fields.attach(*train, {"data", "graph", "model", "train"});
	train->add_option("--resume", resume, "directory holding last.ckpt of an earlier run");

	std::string eval_ckpt;
	auto *eval = app.add_subcommand("eval", "report MAE/RMSE/MAPE per horizon");
	add_common(*eval, eval_c);
	eval_c.fields.attach(*eval, {"data", "graph", "eval"});
	eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();

	std::string predict_ckpt, predict_out;
	auto *predict = app.add_subcommand("predict", "write per-window truth/prediction rows");
	add_common(*predict, predict_c);
	predict_c.fields.attach(*predict, {"data", "graph", "eval"});
	predict->add_option("--checkpoint", predict_ckpt, "checkpoint to run")->required();
	predict->add_option("--output", predict_out, "prediction CSV path (default: <out>/predictions.csv)");

	std::size_t grad_batch = 2;
	auto *grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
	add_common(*grad, grad_c);
	grad_c.fields.attach(*grad, {"model"}, {"synth.nodes", "train.seed", "data.samples_per_hour", "data.t0_offset"});
	grad->add_option("--batch", grad_batch, "random windows in the checked batch");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		const int code = app.exit(e);
		return code == 0 ? exit_ok : exit_config;
	}

	try {
		if (synth->parsed()) {
			return cmd_synth(resolve(synth_c, RunConfig{}));
		}
		if (graph->parsed()) {
			return cmd_build_graph(resolve(graph_c, RunConfig{}), num_nodes);
		}
		if (train->parsed()) {
			return cmd_train(resolve(train_c, RunConfig{}), resume);
		}
		if (eval->parsed()) {
			return cmd_eval(resolve(eval_c, RunConfig{}), eval_ckpt);
		}
		if (predict->parsed()) {
			return cmd_predict(resolve(predict_c, RunConfig{}), predict_ckpt, predict_out);
		}
		if (grad->parsed()) {
			return cmd_gradcheck(resolve(grad_c, gradcheck_defaults()), grad_batch);
		}
	} catch (const ConfigError &e) {
		std::cerr << "config error: " << e.what() << "\n";
		return exit_config;
	} catch (const DataError &e) {
		std::cerr << "data error: " << e.what() << "\n";
		return exit_data;
	} catch (const DimensionError &e) {
		std::cerr << "data error: " << e.what() << "\n";
		return exit_data;
	} catch (const NumericalError &e) {
		std::cerr << "numerical error: " << e.what() << "\n";
		return exit_numerical;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return exit_failure;
	}
	return exit_failure;
}

int run(const std::vector<std::string> &args) {
	std::vector<std::string> storage = args;
	storage.insert(storage.begin(), "sstgnn");
	std::vector<char *> argv;
	for (auto &s : storage) {
		argv.push_back(s.data());
	}
	return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace sstgnn::cli
