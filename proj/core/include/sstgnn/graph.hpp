#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sstgnn/autodiff.hpp"
#include "sstgnn/tensor.hpp"

namespace sstgnn {

struct DistanceEntry {
	std::size_t from = 0;
	std::size_t to = 0;
	double cost = 0.0;
};

/// Pairwise sensor distances as published with the dataset.
struct DistanceTable {
	std::vector<DistanceEntry> entries;
};

/// Reads a `from,to,cost` table. Without an id map, sensor fields are
/// zero-based node indices; with one, they are looked up by sensor id
/// (one id per line, line number = node index). Pairs naming sensors
/// absent from the id map are skipped.
DistanceTable load_distance_csv(const std::filesystem::path &path,
                                const std::optional<std::filesystem::path> &id_map = std::nullopt);
void save_distance_csv(const DistanceTable &table, const std::filesystem::path &path);

/// Reads an id map file: returns the sensor id on each non-empty line.
std::vector<std::string> load_id_map(const std::filesystem::path &path);

/// Undirected binary sensor graph without self loops.
class SensorGraph {
public:
	explicit SensorGraph(std::size_t n_nodes);

	std::size_t n_nodes() const noexcept { return n_; }
	bool has_edge(std::size_t i, std::size_t j) const { return adjacency_[i * n_ + j] != 0; }
	/// Adds the undirected edge {i, j}; self loops are rejected.
	void add_edge(std::size_t i, std::size_t j);
	std::size_t edge_count() const;

	/// Sorted neighbor indices of node i.
	std::vector<std::size_t> neighbors(std::size_t i) const;
	Tensor adjacency_matrix() const;

	/// Graph with node i relabelled to perm[i].
	SensorGraph permuted(const std::vector<std::size_t> &perm) const;

private:
	std::size_t n_;
	std::vector<std::uint8_t> adjacency_;
};

/// Thresholded Gaussian kernel: edge {i,j} iff i != j and
/// exp(-(scale*d_ij)^2 / delta) >= epsilon. Missing pairs have no edge.
SensorGraph build_adjacency(const DistanceTable &distances, std::size_t n_nodes, double delta, double epsilon,
                            double distance_scale = 1.0);

void write_adjacency_csv(const SensorGraph &graph, const std::filesystem::path &path);

/// Unweighted shortest-path hop counts from `source`; -1 marks unreachable nodes.
std::vector<int> bfs_hops(const SensorGraph &graph, std::size_t source);

/// Exact-k-hop structure for k = 1..K.
///
/// hop k of node u holds the nodes at shortest-path distance exactly k;
/// the aggregator for hop k is the row-normalized D_k^{-1} A_k, with an
/// all-zero row when u has no hop-k neighbor.
class HopNeighborhoods {
public:
	HopNeighborhoods() = default;
	HopNeighborhoods(std::size_t n_nodes, std::vector<std::vector<std::vector<std::size_t>>> members);

	std::size_t n_nodes() const noexcept { return n_; }
	std::size_t max_hop() const noexcept { return members_.size(); }

	/// Nodes at distance exactly k (1-based) from u.
	const std::vector<std::size_t> &members(std::size_t k, std::size_t u) const { return members_[k - 1][u]; }
	/// Dense binary A_k.
	Tensor hop_adjacency(std::size_t k) const;
	/// Row-normalized sparse aggregator for hop k.
	const SparseMatrix &aggregator(std::size_t k) const { return aggregators_[k - 1]; }

private:
	std::size_t n_ = 0;
	std::vector<std::vector<std::vector<std::size_t>>> members_;
	std::vector<SparseMatrix> aggregators_;
};

HopNeighborhoods khop_neighborhoods(const SensorGraph &graph, std::size_t max_hop);

/// Mean of X over each node's exact-k-hop neighbors (zero row when none).
Tensor aggregate_hop(const HopNeighborhoods &hops, std::size_t k, const Tensor &x);

} // namespace sstgnn
