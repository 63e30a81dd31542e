#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace diffnet {

// Raised when a structured document violates its schema; the message
// carries enough location context to find the offending entry.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Multi-task network graph: undirected edges, per-node cluster labels and
// Byzantine flags. Immutable after construction; safe to share read-only
// across parallel runs. Neighborhoods always include the node itself and
// are sorted ascending so downstream tie-breaks are deterministic.
class Topology {
public:
    Topology(int num_nodes, std::vector<std::pair<int, int>> edges,
             std::vector<std::string> cluster_of_node, std::vector<int> byzantine);

    int num_nodes() const { return num_nodes_; }
    int num_normal() const { return static_cast<int>(normal_.size()); }

    bool is_byzantine(int i) const { return byz_flag_.at(static_cast<size_t>(i)) != 0; }
    const std::vector<int>& byzantine() const { return byzantine_; }
    const std::vector<int>& normal_nodes() const { return normal_; }

    // sorted ascending, always contains i
    const std::vector<int>& neighbors(int i) const;

    // canonical (min,max) pairs, sorted
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    bool has_edge(int a, int b) const;

    const std::string& cluster(int i) const { return cluster_of_node_.at(static_cast<size_t>(i)); }
    // dense index into cluster_names(), stable across topologies built from
    // the same label set
    int cluster_index(int i) const { return cluster_index_.at(static_cast<size_t>(i)); }
    const std::vector<std::string>& cluster_names() const { return cluster_names_; }

    // returns a topology without the given edges; cutting a non-edge is a
    // no-op, clusters and Byzantine flags are unchanged
    Topology prune_edges(const std::vector<std::pair<int, int>>& cut) const;

private:
    int num_nodes_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::string> cluster_of_node_;
    std::vector<int> cluster_index_;
    std::vector<std::string> cluster_names_;
    std::vector<int> byzantine_;
    std::vector<char> byz_flag_;
    std::vector<int> normal_;
    std::vector<std::vector<int>> neighbor_lists_;
};

// Ideal state vectors, one per cluster; all share the same dimension.
struct IdealStates {
    std::map<std::string, Eigen::VectorXd> per_cluster;

    int dim() const;
    const Eigen::VectorXd& state_for(const Topology& topo, int node) const;
    void validate_against(const Topology& topo) const;
};

// On-disk topology document: graph plus ideal states and optional node
// positions (used by localization scenarios and geometric generators).
struct TopologyDocument {
    Topology topo;
    IdealStates states;
    std::vector<std::array<double, 2>> positions;  // empty when absent
};

TopologyDocument load_topology(const nlohmann::json& doc);
nlohmann::json topology_to_json(const TopologyDocument& doc);

// --- generators -----------------------------------------------------------

// rows x cols 4-neighbor grid, single cluster "A"
Topology make_grid(int rows, int cols);
Topology make_ring(int n);
Topology make_line(int n);
Topology make_complete(int n, const std::vector<std::string>& clusters = {});

// Random geometric graph on the unit square: nodes within `radius` are
// connected. Disconnected samples are rejected and redrawn from a fresh
// derived seed. Clusters are split by the median x coordinate into "A"
// (left) and "B" (right); `n_byzantine` nodes closest to the split line
// are flagged Byzantine. The generator additionally requires the normal
// nodes of each cluster to stay connected among themselves, so resilient
// runs can isolate attackers without stranding anyone.
struct GeometricGraph {
    Topology topo;
    std::vector<std::array<double, 2>> positions;
};

GeometricGraph random_geometric(int n, double radius, std::uint64_t seed,
                                int n_byzantine = 0, int num_clusters = 2,
                                int max_attempts = 2000);

}  // namespace diffnet
