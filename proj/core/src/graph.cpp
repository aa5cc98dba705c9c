#include "sstgnn/graph.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>

#include "csv_util.hpp"
#include "sstgnn/errors.hpp"

namespace sstgnn {

std::vector<std::string> load_id_map(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open id map '" + path.string() + "'");
	}
	std::vector<std::string> ids;
	std::string line;
	while (std::getline(in, line)) {
		const auto t = detail::trim(line);
		if (!t.empty()) {
			ids.emplace_back(t);
		}
	}
	return ids;
}

DistanceTable load_distance_csv(const std::filesystem::path &path, const std::optional<std::filesystem::path> &id_map) {
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open distance file '" + path.string() + "'");
	}
	std::unordered_map<std::string, std::size_t> index;
	if (id_map) {
		const auto ids = load_id_map(*id_map);
		for (std::size_t i = 0; i < ids.size(); ++i) {
			index.emplace(ids[i], i);
		}
	}

	DistanceTable table;
	std::string line;
	std::size_t row = 0;
	while (std::getline(in, line)) {
		++row;
		if (detail::trim(line).empty()) {
			continue;
		}
		const auto fields = detail::split_fields(line);
		if (row == 1 && !detail::parse_double(fields[0])) {
			continue; // header
		}
		if (fields.size() != 3) {
			throw DataError(path.string() + ":" + std::to_string(row) + ": expected 3 fields (from,to,cost)");
		}
		const auto cost = detail::parse_double(fields[2]);
		if (!cost || !std::isfinite(*cost)) {
			throw DataError(path.string() + ":" + std::to_string(row) + ": non-numeric cost");
		}
		if (*cost < 0.0) {
			throw DataError(path.string() + ":" + std::to_string(row) + ": negative distance");
		}
		DistanceEntry e;
		e.cost = *cost;
		if (id_map) {
			const auto a = index.find(std::string(fields[0]));
			const auto b = index.find(std::string(fields[1]));
			if (a == index.end() || b == index.end()) {
				continue;
			}
			e.from = a->second;
			e.to = b->second;
		} else {
			const auto a = detail::parse_int(fields[0]);
			const auto b = detail::parse_int(fields[1]);
			if (!a || !b || *a < 0 || *b < 0) {
				throw DataError(path.string() + ":" + std::to_string(row) + ": sensor index must be a nonnegative integer");
			}
			e.from = static_cast<std::size_t>(*a);
			e.to = static_cast<std::size_t>(*b);
		}
		table.entries.push_back(e);
	}
	return table;
}

void save_distance_csv(const DistanceTable &table, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write '" + path.string() + "'");
	}
	out.precision(17);
	out << "from,to,cost\n";
	for (const auto &e : table.entries) {
		out << e.from << ',' << e.to << ',' << e.cost << '\n';
	}
}

SensorGraph::SensorGraph(std::size_t n_nodes) : n_(n_nodes), adjacency_(n_nodes * n_nodes, 0) {
}

void SensorGraph::add_edge(std::size_t i, std::size_t j) {
	if (i >= n_ || j >= n_) {
		throw DataError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") outside graph of " +
		                std::to_string(n_) + " nodes");
	}
	if (i == j) {
		throw DataError("self loop on node " + std::to_string(i));
	}
	adjacency_[i * n_ + j] = 1;
	adjacency_[j * n_ + i] = 1;
}

std::size_t SensorGraph::edge_count() const {
	std::size_t c = 0;
	for (auto v : adjacency_) {
		c += v;
	}
	return c / 2;
}

std::vector<std::size_t> SensorGraph::neighbors(std::size_t i) const {
	std::vector<std::size_t> out;
	for (std::size_t j = 0; j < n_; ++j) {
		if (adjacency_[i * n_ + j] != 0) {
			out.push_back(j);
		}
	}
	return out;
}

Tensor SensorGraph::adjacency_matrix() const {
	Tensor a({n_, n_});
	for (std::size_t i = 0; i < adjacency_.size(); ++i) {
		a[i] = adjacency_[i];
	}
	return a;
}

SensorGraph SensorGraph::permuted(const std::vector<std::size_t> &perm) const {
	if (perm.size() != n_) {
		throw DimensionError("permutation length differs from node count");
	}
	SensorGraph out(n_);
	for (std::size_t i = 0; i < n_; ++i) {
		for (std::size_t j = i + 1; j < n_; ++j) {
			if (has_edge(i, j)) {
				out.add_edge(perm[i], perm[j]);
			}
		}
	}
	return out;
}

SensorGraph build_adjacency(const DistanceTable &distances, std::size_t n_nodes, double delta, double epsilon,
                            double distance_scale) {
	if (!(delta > 0.0)) {
		throw ConfigError("delta must be positive");
	}
	if (!(epsilon > 0.0 && epsilon <= 1.0)) {
		throw ConfigError("epsilon must lie in (0, 1]");
	}
	if (!(distance_scale > 0.0)) {
		throw ConfigError("distance scale must be positive");
	}
	SensorGraph g(n_nodes);
	for (const auto &e : distances.entries) {
		if (e.from >= n_nodes || e.to >= n_nodes) {
			throw DataError("distance entry (" + std::to_string(e.from) + "," + std::to_string(e.to) +
			                ") references a sensor outside 0.." + std::to_string(n_nodes - 1));
		}
		if (e.cost < 0.0) {
			throw DataError("negative distance between sensors " + std::to_string(e.from) + " and " +
			                std::to_string(e.to));
		}
		if (e.from == e.to) {
			continue;
		}
		const double d = e.cost * distance_scale;
		if (std::exp(-(d * d) / delta) >= epsilon) {
			g.add_edge(e.from, e.to);
		}
	}
	return g;
}

void write_adjacency_csv(const SensorGraph &graph, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write '" + path.string() + "'");
	}
	const std::size_t n = graph.n_nodes();
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			out << (j == 0 ? "" : ",") << (graph.has_edge(i, j) ? 1 : 0);
		}
		out << '\n';
	}
}

std::vector<int> bfs_hops(const SensorGraph &graph, std::size_t source) {
	const std::size_t n = graph.n_nodes();
	std::vector<int> dist(n, -1);
	std::queue<std::size_t> frontier;
	dist[source] = 0;
	frontier.push(source);
	while (!frontier.empty()) {
		const auto u = frontier.front();
		frontier.pop();
		for (std::size_t v = 0; v < n; ++v) {
			if (graph.has_edge(u, v) && dist[v] < 0) {
				dist[v] = dist[u] + 1;
				frontier.push(v);
			}
		}
	}
	return dist;
}

HopNeighborhoods::HopNeighborhoods(std::size_t n_nodes, std::vector<std::vector<std::vector<std::size_t>>> members)
    : n_(n_nodes), members_(std::move(members)) {
	aggregators_.reserve(members_.size());
	for (const auto &hop : members_) {
		if (hop.size() != n_) {
			throw DimensionError("hop member lists must cover every node");
		}
		SparseMatrix m;
		m.n_rows = n_;
		m.n_cols = n_;
		m.row_ptr.assign(1, 0);
		for (std::size_t u = 0; u < n_; ++u) {
			const auto &nbrs = hop[u];
			const double w = nbrs.empty() ? 0.0 : 1.0 / static_cast<double>(nbrs.size());
			for (auto v : nbrs) {
				m.col_idx.push_back(v);
				m.weights.push_back(w);
			}
			m.row_ptr.push_back(m.col_idx.size());
		}
		aggregators_.push_back(std::move(m));
	}
}

Tensor HopNeighborhoods::hop_adjacency(std::size_t k) const {
	Tensor a({n_, n_});
	for (std::size_t u = 0; u < n_; ++u) {
		for (auto v : members_[k - 1][u]) {
			a(u, v) = 1.0;
		}
	}
	return a;
}

HopNeighborhoods khop_neighborhoods(const SensorGraph &graph, std::size_t max_hop) {
	if (max_hop < 1) {
		throw ConfigError("K must be at least 1");
	}
	const std::size_t n = graph.n_nodes();
	std::vector<std::vector<std::size_t>> adjacency(n);
	for (std::size_t u = 0; u < n; ++u) {
		adjacency[u] = graph.neighbors(u);
	}

	std::vector<std::vector<std::vector<std::size_t>>> members(max_hop, std::vector<std::vector<std::size_t>>(n));
	std::vector<std::size_t> dist(n);
	constexpr auto unseen = static_cast<std::size_t>(-1);
	for (std::size_t src = 0; src < n; ++src) {
		std::fill(dist.begin(), dist.end(), unseen);
		std::queue<std::size_t> frontier;
		dist[src] = 0;
		frontier.push(src);
		while (!frontier.empty()) {
			const auto u = frontier.front();
			frontier.pop();
			if (dist[u] == max_hop) {
				continue;
			}
			for (auto v : adjacency[u]) {
				if (dist[v] == unseen) {
					dist[v] = dist[u] + 1;
					frontier.push(v);
				}
			}
		}
		for (std::size_t v = 0; v < n; ++v) {
			if (v != src && dist[v] != unseen) {
				members[dist[v] - 1][src].push_back(v);
			}
		}
	}
	return HopNeighborhoods(n, std::move(members));
}

Tensor aggregate_hop(const HopNeighborhoods &hops, std::size_t k, const Tensor &x) {
	if (k < 1 || k > hops.max_hop()) {
		throw DimensionError("hop " + std::to_string(k) + " outside 1.." + std::to_string(hops.max_hop()));
	}
	if (x.rank() != 2 || x.rows() != hops.n_nodes()) {
		throw DimensionError("aggregate_hop: features " + to_string(x.shape()) + " do not have " +
		                     std::to_string(hops.n_nodes()) + " rows");
	}
	return block_spmm(hops.aggregator(k), x);
}

} // namespace sstgnn
