#include "diffnet/topology.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "diffnet/rng.hpp"

namespace diffnet {

namespace {

std::pair<int, int> canonical(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// connectivity over an arbitrary node subset, using only edges inside it
bool subset_connected(const std::vector<std::pair<int, int>>& edges,
                      const std::vector<int>& nodes) {
    if (nodes.empty()) return true;
    std::map<int, std::vector<int>> adj;
    for (int v : nodes) adj[v] = {};
    for (const auto& [a, b] : edges) {
        if (adj.count(a) && adj.count(b)) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    std::set<int> seen{nodes.front()};
    std::vector<int> stack{nodes.front()};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[v]) {
            if (seen.insert(w).second) stack.push_back(w);
        }
    }
    return seen.size() == nodes.size();
}

}  // namespace

Topology::Topology(int num_nodes, std::vector<std::pair<int, int>> edges,
                   std::vector<std::string> cluster_of_node, std::vector<int> byzantine)
    : num_nodes_(num_nodes), cluster_of_node_(std::move(cluster_of_node)) {
    if (num_nodes_ <= 0) throw SchemaError("topology: node count must be positive");
    if (static_cast<int>(cluster_of_node_.size()) != num_nodes_)
        throw SchemaError("topology: every node needs a cluster label");

    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : edges) {
        if (a < 0 || a >= num_nodes_ || b < 0 || b >= num_nodes_)
            throw SchemaError("topology: edge [" + std::to_string(a) + "," +
                              std::to_string(b) + "] references an unknown node");
        if (a == b)
            throw SchemaError("topology: self-edge on node " + std::to_string(a) +
                              " (self-inclusion is implicit)");
        if (!seen.insert(canonical(a, b)).second)
            throw SchemaError("topology: duplicate edge [" + std::to_string(a) + "," +
                              std::to_string(b) + "]");
    }
    edges_.assign(seen.begin(), seen.end());

    byz_flag_.assign(static_cast<size_t>(num_nodes_), 0);
    for (int b : byzantine) {
        if (b < 0 || b >= num_nodes_)
            throw SchemaError("topology: byzantine id " + std::to_string(b) +
                              " out of range");
        byz_flag_[static_cast<size_t>(b)] = 1;
    }
    for (int i = 0; i < num_nodes_; ++i)
        (byz_flag_[static_cast<size_t>(i)] ? byzantine_ : normal_).push_back(i);

    std::set<std::string> labels(cluster_of_node_.begin(), cluster_of_node_.end());
    cluster_names_.assign(labels.begin(), labels.end());
    cluster_index_.resize(static_cast<size_t>(num_nodes_));
    for (int i = 0; i < num_nodes_; ++i) {
        auto it = std::lower_bound(cluster_names_.begin(), cluster_names_.end(),
                                   cluster_of_node_[static_cast<size_t>(i)]);
        cluster_index_[static_cast<size_t>(i)] =
            static_cast<int>(it - cluster_names_.begin());
    }

    neighbor_lists_.resize(static_cast<size_t>(num_nodes_));
    for (int i = 0; i < num_nodes_; ++i) neighbor_lists_[static_cast<size_t>(i)].push_back(i);
    for (const auto& [a, b] : edges_) {
        neighbor_lists_[static_cast<size_t>(a)].push_back(b);
        neighbor_lists_[static_cast<size_t>(b)].push_back(a);
    }
    for (auto& nl : neighbor_lists_) std::sort(nl.begin(), nl.end());
}

const std::vector<int>& Topology::neighbors(int i) const {
    if (i < 0 || i >= num_nodes_)
        throw std::invalid_argument("neighbors: node id " + std::to_string(i) +
                                    " out of range");
    return neighbor_lists_[static_cast<size_t>(i)];
}

bool Topology::has_edge(int a, int b) const {
    if (a == b) return false;
    auto e = canonical(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), e);
}

Topology Topology::prune_edges(const std::vector<std::pair<int, int>>& cut) const {
    std::set<std::pair<int, int>> removed;
    for (auto [a, b] : cut) removed.insert(canonical(a, b));
    std::vector<std::pair<int, int>> kept;
    for (const auto& e : edges_)
        if (!removed.count(e)) kept.push_back(e);
    return Topology(num_nodes_, std::move(kept), cluster_of_node_, byzantine_);
}

int IdealStates::dim() const {
    if (per_cluster.empty()) throw std::invalid_argument("ideal states: empty");
    return static_cast<int>(per_cluster.begin()->second.size());
}

const Eigen::VectorXd& IdealStates::state_for(const Topology& topo, int node) const {
    auto it = per_cluster.find(topo.cluster(node));
    if (it == per_cluster.end())
        throw SchemaError("ideal states: no state for cluster '" + topo.cluster(node) +
                          "'");
    return it->second;
}

void IdealStates::validate_against(const Topology& topo) const {
    int d = dim();
    for (const auto& [name, vec] : per_cluster)
        if (vec.size() != d)
            throw SchemaError("ideal states: cluster '" + name +
                              "' has mismatched dimension");
    for (int i : topo.normal_nodes())
        if (!per_cluster.count(topo.cluster(i)))
            throw SchemaError("ideal states: unknown cluster reference '" +
                              topo.cluster(i) + "' (node " + std::to_string(i) + ")");
}

TopologyDocument load_topology(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("topology document: expected an object");
    for (const char* key : {"nodes", "edges", "clusters", "byzantine", "ideal_states"})
        if (!doc.contains(key))
            throw SchemaError(std::string("topology document: missing key '") + key + "'");

    int n = doc.at("nodes").get<int>();

    std::vector<std::pair<int, int>> edges;
    for (const auto& e : doc.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw SchemaError("topology document: edges must be [j,i] pairs");
        edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }

    std::vector<std::string> clusters(static_cast<size_t>(std::max(n, 0)));
    std::vector<char> have(static_cast<size_t>(std::max(n, 0)), 0);
    for (const auto& [key, value] : doc.at("clusters").items()) {
        int id = std::stoi(key);
        if (id < 0 || id >= n)
            throw SchemaError("topology document: clusters references node " + key);
        clusters[static_cast<size_t>(id)] = value.get<std::string>();
        have[static_cast<size_t>(id)] = 1;
    }
    for (int i = 0; i < n; ++i)
        if (!have[static_cast<size_t>(i)])
            throw SchemaError("topology document: node " + std::to_string(i) +
                              " has no cluster label");

    std::vector<int> byz = doc.at("byzantine").get<std::vector<int>>();

    Topology topo(n, std::move(edges), std::move(clusters), std::move(byz));

    IdealStates states;
    for (const auto& [name, vec] : doc.at("ideal_states").items()) {
        auto v = vec.get<std::vector<double>>();
        states.per_cluster[name] =
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    }
    states.validate_against(topo);

    TopologyDocument out{std::move(topo), std::move(states), {}};
    if (doc.contains("positions")) {
        for (const auto& p : doc.at("positions"))
            out.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        if (!out.positions.empty() &&
            static_cast<int>(out.positions.size()) != out.topo.num_nodes())
            throw SchemaError("topology document: positions count mismatch");
    }
    return out;
}

nlohmann::json topology_to_json(const TopologyDocument& doc) {
    nlohmann::json j;
    j["nodes"] = doc.topo.num_nodes();
    j["edges"] = nlohmann::json::array();
    for (const auto& [a, b] : doc.topo.edges()) j["edges"].push_back({a, b});
    nlohmann::json clusters = nlohmann::json::object();
    for (int i = 0; i < doc.topo.num_nodes(); ++i)
        clusters[std::to_string(i)] = doc.topo.cluster(i);
    j["clusters"] = std::move(clusters);
    j["byzantine"] = doc.topo.byzantine();
    nlohmann::json states = nlohmann::json::object();
    for (const auto& [name, vec] : doc.states.per_cluster)
        states[name] = std::vector<double>(vec.data(), vec.data() + vec.size());
    j["ideal_states"] = std::move(states);
    if (!doc.positions.empty()) {
        j["positions"] = nlohmann::json::array();
        for (const auto& p : doc.positions) j["positions"].push_back({p[0], p[1]});
    }
    return j;
}

Topology make_grid(int rows, int cols) {
    int n = rows * cols;
    std::vector<std::pair<int, int>> edges;
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
            if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
        }
    return Topology(n, std::move(edges), std::vector<std::string>(static_cast<size_t>(n), "A"),
                    {});
}

Topology make_ring(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    if (n == 2) edges.pop_back();  // avoid the duplicate (0,1)
    return Topology(n, std::move(edges), std::vector<std::string>(static_cast<size_t>(n), "A"),
                    {});
}

Topology make_line(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return Topology(n, std::move(edges), std::vector<std::string>(static_cast<size_t>(n), "A"),
                    {});
}

Topology make_complete(int n, const std::vector<std::string>& clusters) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    auto labels = clusters.empty() ? std::vector<std::string>(static_cast<size_t>(n), "A")
                                   : clusters;
    return Topology(n, std::move(edges), labels, {});
}

GeometricGraph random_geometric(int n, double radius, std::uint64_t seed, int n_byzantine,
                                int num_clusters, int max_attempts) {
    if (n <= 0) throw std::invalid_argument("random_geometric: n must be positive");
    if (num_clusters < 1 || num_clusters > 2)
        throw std::invalid_argument("random_geometric: 1 or 2 clusters supported");
    if (n_byzantine >= n)
        throw std::invalid_argument("random_geometric: too many byzantine nodes");

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        RngStream rng(seed, static_cast<std::uint64_t>(attempt), 0, RngStream::kTopology);

        // Spatially separated communities: cluster bands on the left and
        // right of the unit square with a gap between them, byzantine nodes
        // inside the gap so they can reach both sides. Cross-cluster edges
        // then only appear near the boundary, the shape the clustered
        // networks in this problem family have.
        std::vector<std::array<double, 2>> pos(static_cast<size_t>(n));
        std::vector<std::string> clusters(static_cast<size_t>(n), "A");
        std::vector<int> byz;
        for (int i = 0; i < n_byzantine; ++i) {
            byz.push_back(i);
            pos[static_cast<size_t>(i)] = {0.42 + 0.16 * rng.uniform01(),
                                           rng.uniform01()};
        }
        for (int i = n_byzantine; i < n; ++i) {
            bool left = num_clusters == 1 || (i - n_byzantine) % 2 == 0;
            pos[static_cast<size_t>(i)] = {left ? 0.45 * rng.uniform01()
                                                : 0.55 + 0.45 * rng.uniform01(),
                                           rng.uniform01()};
            if (!left) clusters[static_cast<size_t>(i)] = "B";
        }

        std::vector<std::pair<int, int>> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double dx = pos[static_cast<size_t>(i)][0] - pos[static_cast<size_t>(j)][0];
                double dy = pos[static_cast<size_t>(i)][1] - pos[static_cast<size_t>(j)][1];
                if (dx * dx + dy * dy <= radius * radius) edges.emplace_back(i, j);
            }

        std::vector<int> all(static_cast<size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        if (!subset_connected(edges, all)) continue;

        // Each cluster's normal nodes must stay connected among themselves,
        // otherwise isolating the byzantine nodes would strand someone. They
        // must also stay anchored: at least two same-cluster neighbors per
        // node and no single cut vertex, so no node's only in-task anchors
        // are its own dependents (a star-shaped cluster lets the hub get
        // entrained by the other task).
        std::set<int> byzset(byz.begin(), byz.end());
        bool ok = true;
        std::set<std::string> labels(clusters.begin(), clusters.end());
        for (const auto& label : labels) {
            std::vector<int> members;
            for (int i = 0; i < n; ++i)
                if (clusters[static_cast<size_t>(i)] == label && !byzset.count(i))
                    members.push_back(i);
            if (members.empty() || !subset_connected(edges, members)) {
                ok = false;
                break;
            }
            if (members.size() >= 3) {
                // identifiability: in-task neighbors must dominate, or a
                // boundary node can be entrained by the other task before the
                // adaptive weights separate the clusters
                for (int i : members) {
                    int same = 0, cross = 0;
                    for (const auto& [a, b] : edges) {
                        int other = a == i ? b : (b == i ? a : -1);
                        if (other < 0 || byzset.count(other)) continue;
                        (clusters[static_cast<size_t>(other)] == label ? same : cross)++;
                    }
                    if (same < 2 || same < cross + 1) {
                        ok = false;
                        break;
                    }
                }
                for (int removed : members) {
                    if (!ok) break;
                    std::vector<int> rest;
                    for (int m : members)
                        if (m != removed) rest.push_back(m);
                    if (!subset_connected(edges, rest)) ok = false;
                }
            } else if (members.size() == 2 && !subset_connected(edges, members)) {
                ok = false;
            }
            if (!ok) break;
        }
        // byzantine nodes must have at least one normal neighbor to attack
        for (int b : byz) {
            bool found = false;
            for (const auto& [x, y] : edges) {
                int other = x == b ? y : (y == b ? x : -1);
                if (other >= 0 && !byzset.count(other)) {
                    found = true;
                    break;
                }
            }
            if (!found) ok = false;
        }
        if (!ok) continue;

        return GeometricGraph{Topology(n, std::move(edges), std::move(clusters), byz),
                              std::move(pos)};
    }
    throw std::runtime_error("random_geometric: no admissible sample after retries");
}

}  // namespace diffnet
