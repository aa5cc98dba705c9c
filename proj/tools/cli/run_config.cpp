#include "cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sstgnn/errors.hpp"

namespace sstgnn::cli {

namespace {

std::string trim(const std::string &s) {
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string::npos) {
		return {};
	}
	const auto e = s.find_last_not_of(" \t\r\n");
	return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string &v) {
	std::size_t out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size()) {
		throw ConfigError("expected a nonnegative integer, got '" + v + "'");
	}
	return out;
}

std::int64_t to_int(const std::string &v) {
	std::int64_t out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size()) {
		throw ConfigError("expected an integer, got '" + v + "'");
	}
	return out;
}

std::uint64_t to_u64(const std::string &v) {
	std::uint64_t out = 0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size()) {
		throw ConfigError("expected an unsigned integer, got '" + v + "'");
	}
	return out;
}

double to_double(const std::string &v) {
	double out = 0.0;
	const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
	if (ec != std::errc() || p != v.data() + v.size()) {
		throw ConfigError("expected a number, got '" + v + "'");
	}
	return out;
}

bool to_bool(const std::string &v) {
	if (v == "true" || v == "1" || v == "yes" || v == "on") {
		return true;
	}
	if (v == "false" || v == "0" || v == "no" || v == "off") {
		return false;
	}
	throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_size_list(const std::string &v) {
	std::vector<std::size_t> out;
	std::stringstream ss(v);
	std::string item;
	while (std::getline(ss, item, ',')) {
		item = trim(item);
		if (!item.empty()) {
			out.push_back(to_size(item));
		}
	}
	if (out.empty()) {
		throw ConfigError("expected a comma-separated list of integers, got '" + v + "'");
	}
	return out;
}

std::vector<std::string> to_string_list(const std::string &v) {
	std::vector<std::string> out;
	std::stringstream ss(v);
	std::string item;
	while (std::getline(ss, item, ',')) {
		item = trim(item);
		if (!item.empty()) {
			out.push_back(item);
		}
	}
	return out;
}

template <typename T>
std::string join(const std::vector<T> &v) {
	std::ostringstream os;
	for (std::size_t i = 0; i < v.size(); ++i) {
		os << (i == 0 ? "" : ",") << v[i];
	}
	return os.str();
}

std::string num(double v) {
	char buf[64];
	const auto r = std::to_chars(buf, buf + sizeof(buf), v);
	return std::string(buf, r.ptr);
}

std::string boolean(bool b) {
	return b ? "true" : "false";
}

ConfigField field(std::string section, std::string key, std::string flag, std::string help,
                  std::function<std::string(const RunConfig &)> get,
                  std::function<void(RunConfig &, const std::string &)> set) {
	return {std::move(section), std::move(key), std::move(flag), std::move(help), std::move(get), std::move(set)};
}

} // namespace

const std::vector<ConfigField> &config_fields() {
	using C = RunConfig;
	static const std::vector<ConfigField> fields = {
	    field("data", "speeds", "--speeds", "speed matrix CSV (rows = samples, columns = sensors)",
	          [](const C &c) { return c.speeds; }, [](C &c, const std::string &v) { c.speeds = v; }),
	    field("data", "distances", "--distances", "distance table CSV with header from,to,cost",
	          [](const C &c) { return c.distances; }, [](C &c, const std::string &v) { c.distances = v; }),
	    field("data", "id_map", "--id-map", "optional sensor id file (line number = node index)",
	          [](const C &c) { return c.id_map; }, [](C &c, const std::string &v) { c.id_map = v; }),
	    field("data", "preset", "--preset", "dataset preset: none|pemsd7|pemsd4|pemsd8",
	          [](const C &c) { return c.preset; }, [](C &c, const std::string &v) { apply_preset(c, v); }),
	    field("data", "samples_per_hour", "--samples-per-hour", "samples per hour (12 for 5-minute data)",
	          [](const C &c) { return std::to_string(c.samples_per_hour); },
	          [](C &c, const std::string &v) { c.samples_per_hour = static_cast<int>(to_size(v)); }),
	    field("data", "t0_offset", "--t0-offset", "samples between midnight and the first row",
	          [](const C &c) { return std::to_string(c.t0_offset); },
	          [](C &c, const std::string &v) { c.t0_offset = to_int(v); }),
	    field("data", "train_days", "--train-days", "days in the training split (0: use fractions)",
	          [](const C &c) { return std::to_string(c.train_days); },
	          [](C &c, const std::string &v) { c.train_days = to_size(v); }),
	    field("data", "val_days", "--val-days", "days in the validation split (0: half the remainder)",
	          [](const C &c) { return std::to_string(c.val_days); },
	          [](C &c, const std::string &v) { c.val_days = to_size(v); }),
	    field("data", "train_fraction", "--train-fraction", "fraction of days for training",
	          [](const C &c) { return num(c.train_fraction); },
	          [](C &c, const std::string &v) { c.train_fraction = to_double(v); }),
	    field("data", "val_fraction", "--val-fraction", "fraction of days for validation",
	          [](const C &c) { return num(c.val_fraction); },
	          [](C &c, const std::string &v) { c.val_fraction = to_double(v); }),
	    field("data", "normalization", "--normalization", "global|per_sensor z-score",
	          [](const C &c) { return c.normalization; },
	          [](C &c, const std::string &v) {
		          if (v != "global" && v != "per_sensor") {
			          throw ConfigError("expected global or per_sensor, got '" + v + "'");
		          }
		          c.normalization = v;
	          }),
	    field("data", "missing", "--missing", "reject|forward_fill missing readings",
	          [](const C &c) { return c.missing; },
	          [](C &c, const std::string &v) {
		          if (v != "reject" && v != "forward_fill") {
			          throw ConfigError("expected reject or forward_fill, got '" + v + "'");
		          }
		          c.missing = v;
	          }),
	    field("data", "stride", "--stride", "step between window starts",
	          [](const C &c) { return std::to_string(c.stride); },
	          [](C &c, const std::string &v) { c.stride = to_size(v); }),

	    field("synth", "nodes", "--nodes", "number of synthetic sensors",
	          [](const C &c) { return std::to_string(c.synth_nodes); },
	          [](C &c, const std::string &v) { c.synth_nodes = to_size(v); }),
	    field("synth", "days", "--days", "number of synthetic days",
	          [](const C &c) { return std::to_string(c.synth_days); },
	          [](C &c, const std::string &v) { c.synth_days = to_size(v); }),
	    field("synth", "noise", "--noise", "stationary std of the speed disturbance",
	          [](const C &c) { return num(c.synth_noise); },
	          [](C &c, const std::string &v) { c.synth_noise = to_double(v); }),
	    field("synth", "persistence", "--persistence", "per-sample autocorrelation of the disturbance",
	          [](const C &c) { return num(c.synth_persistence); },
	          [](C &c, const std::string &v) { c.synth_persistence = to_double(v); }),

	    field("graph", "delta", "--delta", "Gaussian kernel width",
	          [](const C &c) { return num(c.delta); }, [](C &c, const std::string &v) { c.delta = to_double(v); }),
	    field("graph", "epsilon", "--epsilon", "kernel threshold",
	          [](const C &c) { return num(c.epsilon); }, [](C &c, const std::string &v) { c.epsilon = to_double(v); }),
	    field("graph", "distance_scale", "--distance-scale", "multiplier applied to every distance",
	          [](const C &c) { return num(c.distance_scale); },
	          [](C &c, const std::string &v) { c.distance_scale = to_double(v); }),

	    field("model", "window", "--window", "input timestamps T",
	          [](const C &c) { return std::to_string(c.model.window); },
	          [](C &c, const std::string &v) { c.model.window = to_size(v); }),
	    field("model", "max_hop", "--max-hop", "largest hop distance K",
	          [](const C &c) { return std::to_string(c.model.max_hop); },
	          [](C &c, const std::string &v) { c.model.max_hop = to_size(v); }),
	    field("model", "history_days", "--history-days", "historical days P",
	          [](const C &c) { return std::to_string(c.model.history_days); },
	          [](C &c, const std::string &v) { c.model.history_days = to_size(v); }),
	    field("model", "hidden_dim", "--hidden-dim", "per-timestamp embedding width",
	          [](const C &c) { return std::to_string(c.model.hidden_dim); },
	          [](C &c, const std::string &v) { c.model.hidden_dim = to_size(v); }),
	    field("model", "final_dim", "--final-dim", "combined embedding width",
	          [](const C &c) { return std::to_string(c.model.final_dim); },
	          [](C &c, const std::string &v) { c.model.final_dim = to_size(v); }),
	    field("model", "head_dim", "--head-dim", "prediction head hidden width",
	          [](const C &c) { return std::to_string(c.model.head_dim); },
	          [](C &c, const std::string &v) { c.model.head_dim = to_size(v); }),
	    field("model", "horizons", "--horizons", "predicted steps, comma separated",
	          [](const C &c) { return join(c.model.horizons); },
	          [](C &c, const std::string &v) { c.model.horizons = to_size_list(v); }),
	    field("model", "branches", "--branches", "historical|current|both",
	          [](const C &c) { return to_string(c.model.branches); },
	          [](C &c, const std::string &v) { c.model.branches = parse_branch_mode(v); }),
	    field("model", "share_weights", "--share-weights", "tie spatial/combination weights across timestamps",
	          [](const C &c) { return boolean(c.model.share_weights); },
	          [](C &c, const std::string &v) { c.model.share_weights = to_bool(v); }),

	    field("train", "lr0", "--lr", "initial learning rate",
	          [](const C &c) { return num(c.train.lr0); }, [](C &c, const std::string &v) { c.train.lr0 = to_double(v); }),
	    field("train", "decay_rate", "--decay-rate", "learning rate multiplier per decay period",
	          [](const C &c) { return num(c.train.decay_rate); },
	          [](C &c, const std::string &v) { c.train.decay_rate = to_double(v); }),
	    field("train", "decay_every", "--decay-every", "epochs per decay period",
	          [](const C &c) { return std::to_string(c.train.decay_every); },
	          [](C &c, const std::string &v) { c.train.decay_every = to_size(v); }),
	    field("train", "epochs", "--epochs", "training epochs",
	          [](const C &c) { return std::to_string(c.train.epochs); },
	          [](C &c, const std::string &v) { c.train.epochs = to_size(v); }),
	    field("train", "batch_size", "--batch-size", "windows per minibatch (0: full batch)",
	          [](const C &c) { return std::to_string(c.train.batch_size); },
	          [](C &c, const std::string &v) { c.train.batch_size = to_size(v); }),
	    field("train", "seed", "--seed", "seed for initialization, shuffling and synthesis",
	          [](const C &c) { return std::to_string(c.train.seed); },
	          [](C &c, const std::string &v) { c.train.seed = to_u64(v); }),
	    field("train", "shuffle", "--shuffle", "shuffle windows each epoch",
	          [](const C &c) { return boolean(c.train.shuffle); },
	          [](C &c, const std::string &v) { c.train.shuffle = to_bool(v); }),
	    field("train", "select_best", "--select-best", "keep the lowest-validation-MSE parameters",
	          [](const C &c) { return boolean(c.train.select_best); },
	          [](C &c, const std::string &v) { c.train.select_best = to_bool(v); }),
	    field("train", "trainable", "--trainable", "comma-separated parameter id prefixes to train (empty: all)",
	          [](const C &c) { return join(c.train.trainable_prefixes); },
	          [](C &c, const std::string &v) { c.train.trainable_prefixes = to_string_list(v); }),
	    field("train", "adam_beta1", "--adam-beta1", "ADAM first-moment decay",
	          [](const C &c) { return num(c.train.adam.beta1); },
	          [](C &c, const std::string &v) { c.train.adam.beta1 = to_double(v); }),
	    field("train", "adam_beta2", "--adam-beta2", "ADAM second-moment decay",
	          [](const C &c) { return num(c.train.adam.beta2); },
	          [](C &c, const std::string &v) { c.train.adam.beta2 = to_double(v); }),
	    field("train", "adam_epsilon", "--adam-epsilon", "ADAM denominator offset",
	          [](const C &c) { return num(c.train.adam.epsilon); },
	          [](C &c, const std::string &v) { c.train.adam.epsilon = to_double(v); }),

	    field("eval", "mask_floor", "--mask-floor", "MAPE ignores truths below this magnitude",
	          [](const C &c) { return num(c.mask_floor); }, [](C &c, const std::string &v) { c.mask_floor = to_double(v); }),
	    field("eval", "report_steps", "--report-steps", "horizon steps to report",
	          [](const C &c) { return join(c.report_steps); },
	          [](C &c, const std::string &v) { c.report_steps = to_size_list(v); }),
	    field("eval", "split", "--split", "train|val|test",
	          [](const C &c) { return c.split; },
	          [](C &c, const std::string &v) {
		          if (v != "train" && v != "val" && v != "test") {
			          throw ConfigError("expected train, val or test, got '" + v + "'");
		          }
		          c.split = v;
	          }),
	    field("eval", "batch", "--eval-batch", "windows per evaluation batch",
	          [](const C &c) { return std::to_string(c.eval_batch); },
	          [](C &c, const std::string &v) { c.eval_batch = std::max<std::size_t>(1, to_size(v)); }),
	};
	return fields;
}

void apply_preset(RunConfig &config, const std::string &preset) {
	if (preset == "none") {
	} else if (preset == "pemsd7") {
		config.model.max_hop = 2;
		config.train_days = 23;
		config.val_days = 0;
	} else if (preset == "pemsd4") {
		config.model.max_hop = 4;
		config.train_days = 47;
		config.val_days = 0;
	} else if (preset == "pemsd8") {
		config.model.max_hop = 4;
		config.train_days = 50;
		config.val_days = 0;
	} else {
		throw ConfigError("unknown preset '" + preset + "' (expected none, pemsd7, pemsd4 or pemsd8)");
	}
	config.preset = preset;
}

void apply_config_file(RunConfig &config, const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError("cannot open config file '" + path.string() + "'");
	}
	const auto &fields = config_fields();
	std::string section;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
		line = trim(line);
		if (line.empty() || line[0] == '#' || line[0] == ';') {
			continue;
		}
		if (line.front() == '[') {
			if (line.back() != ']') {
				throw ConfigError(where + "unterminated section header");
			}
			section = trim(line.substr(1, line.size() - 2));
			continue;
		}
		const auto eq = line.find('=');
		if (eq == std::string::npos) {
			throw ConfigError(where + "expected key = value");
		}
		const std::string key = trim(line.substr(0, eq));
		const std::string value = trim(line.substr(eq + 1));
		const auto it = std::find_if(fields.begin(), fields.end(),
		                             [&](const ConfigField &f) { return f.section == section && f.key == key; });
		if (it == fields.end()) {
			throw ConfigError(where + "unknown field [" + section + "] " + key);
		}
		try {
			it->set(config, value);
		} catch (const ConfigError &e) {
			throw ConfigError(where + "[" + section + "] " + key + ": " + e.what());
		} catch (const std::exception &e) {
			throw ConfigError(where + "[" + section + "] " + key + ": " + e.what());
		}
	}
}

void write_config_snapshot(const RunConfig &config, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write config snapshot '" + path.string() + "'");
	}
	std::string section;
	for (const auto &f : config_fields()) {
		if (f.section != section) {
			out << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
			section = f.section;
		}
		out << f.key << " = " << f.get(config) << "\n";
	}
}

std::string default_out_dir() {
	if (const char *env = std::getenv("SSTGNN_OUT_DIR"); env != nullptr && *env != '\0') {
		return env;
	}
	return "sstgnn_out";
}

} // namespace sstgnn::cli
