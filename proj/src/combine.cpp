#include "diffnet/combine.hpp"

#include <algorithm>
#include <cmath>

#include "diffnet/scenarios.hpp"

namespace diffnet {

AlgorithmKind algorithm_from_string(const std::string& name) {
    if (name == "NC-LMS") return AlgorithmKind::kNcLms;
    if (name == "DLMS") return AlgorithmKind::kDlms;
    if (name == "NC-LMG") return AlgorithmKind::kNcLmg;
    if (name == "DLMG") return AlgorithmKind::kDlmg;
    if (name == "RDLMS") return AlgorithmKind::kRdlms;
    if (name == "RDLMG") return AlgorithmKind::kRdlmg;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(AlgorithmKind k) {
    switch (k) {
        case AlgorithmKind::kNcLms: return "NC-LMS";
        case AlgorithmKind::kDlms: return "DLMS";
        case AlgorithmKind::kNcLmg: return "NC-LMG";
        case AlgorithmKind::kDlmg: return "DLMG";
        case AlgorithmKind::kRdlms: return "RDLMS";
        case AlgorithmKind::kRdlmg: return "RDLMG";
    }
    return "?";
}

std::vector<int> removal_set(const std::vector<std::pair<int, double>>& contributions,
                             int removal_count) {
    if (removal_count < 0)
        throw std::invalid_argument("removal_set: removal count must be >= 0");
    int n = static_cast<int>(contributions.size());
    int effective = std::min(removal_count, std::max(n - 1, 0));
    if (effective == 0) return {};
    std::vector<std::pair<int, double>> sorted(contributions);
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<int> removed;
    removed.reserve(static_cast<size_t>(effective));
    for (int k = 0; k < effective; ++k) removed.push_back(sorted[static_cast<size_t>(k)].first);
    std::sort(removed.begin(), removed.end());
    return removed;
}

void combination_weights(const Eigen::VectorXd& gamma_sq,
                         const std::vector<char>& survivor_mask, Eigen::VectorXd& out) {
    out.setZero(gamma_sq.size());
    double total = 0.0;
    for (long s = 0; s < gamma_sq.size(); ++s) {
        if (!survivor_mask[static_cast<size_t>(s)]) continue;
        double inv = 1.0 / gamma_sq[s];
        out[s] = inv;
        total += inv;
    }
    if (total <= 0.0)
        throw std::logic_error("combination_weights: empty survivor set");
    out /= total;
}

Eigen::VectorXd combine_step(const std::vector<double>& weights,
                             const std::vector<const Eigen::VectorXd*>& psis) {
    if (weights.size() != psis.size() || psis.empty())
        throw std::invalid_argument("combine_step: weight/message count mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(psis.front()->size());
    for (size_t k = 0; k < weights.size(); ++k) {
        if (psis[k]->size() != out.size())
            throw std::invalid_argument("combine_step: dimension mismatch");
        out += weights[k] * (*psis[k]);
    }
    return out;
}

World::World(const Topology& topo, const IdealStates& states, AlgorithmKind kind,
             std::vector<AdaptParams> adapt_per_node, CombineParams combine,
             DataModel& data, const AttackSpec* attack, double divergence_threshold,
             long run_index, BlockUpdateMode block_mode)
    : topo_(topo),
      kind_(kind),
      adapt_(std::move(adapt_per_node)),
      combine_(combine),
      data_(data),
      attack_(attack),
      divergence_threshold_(divergence_threshold),
      run_index_(run_index),
      block_mode_(block_mode) {
    if (static_cast<int>(adapt_.size()) != topo_.num_nodes())
        throw std::invalid_argument("world: adapt params must cover every node");
    int dim = states.dim();
    Kernel kern = kernel_of(kind_);
    for (auto& p : adapt_) p.kernel = kern;

    nodes_.resize(static_cast<size_t>(topo_.num_nodes()));
    for (int i = 0; i < topo_.num_nodes(); ++i) {
        auto& node = nodes_[static_cast<size_t>(i)];
        node.est.w = Eigen::VectorXd::Zero(dim);
        node.est.psi = node.est.w;
        long slots = static_cast<long>(topo_.neighbors(i).size());
        node.gamma_sq = Eigen::VectorXd::Constant(slots, combine_.gamma_sq_init);
        node.q_estimate = Eigen::VectorXd::Zero(slots);
        node.w_next = node.est.w;
    }
    weights_ = Eigen::MatrixXd::Zero(topo_.num_nodes(), topo_.num_nodes());
    // sized once so message pointers into it stay valid across the slot loop
    fab_buf_.resize(topo_.byzantine().size());

    // prime the first observation of every normal node
    for (int i : topo_.normal_nodes())
        data_.sample(i, nodes_[static_cast<size_t>(i)].current);
}

double World::message_sq_err(NodeRuntime& me, const Eigen::VectorXd& message) {
    if (!data_.is_block()) {
        double e = me.next.d - me.next.u.dot(message);
        return e * e;
    }
    me.block_scratch.noalias() = (*me.next.basis) * message;
    return (me.next.d_block - me.block_scratch).squaredNorm() /
           static_cast<double>(me.next.d_block.size());
}

bool World::run_iteration() {
    if (divergence_) return false;
    bool attack_live = attack_ != nullptr && attack_->active_at(iteration_);

    // phase 1: local adaptation on the current observation
    for (int i : topo_.normal_nodes()) {
        auto& node = nodes_[static_cast<size_t>(i)];
        if (data_.is_block())
            block_adapt(node.est, adapt_[static_cast<size_t>(i)], node.current.d_block,
                        *node.current.basis, block_mode_, node.block_scratch);
        else
            adapt_step(node.est, adapt_[static_cast<size_t>(i)], node.current.d,
                       node.current.u);
    }

    // next observation is drawn up front: resilient nodes grade neighbor
    // messages against it, and the following iteration adapts on it
    for (int i : topo_.normal_nodes())
        data_.sample(i, nodes_[static_cast<size_t>(i)].next);

    if (is_cooperative(kind_)) {
        bool resilient = is_resilient(kind_);
        for (int i : topo_.normal_nodes()) {
            auto& node = nodes_[static_cast<size_t>(i)];
            const auto& nbrs = topo_.neighbors(i);
            size_t slots = nbrs.size();

            msgs_.assign(slots, nullptr);
            size_t fab_used = 0;
            for (size_t s = 0; s < slots; ++s) {
                int j = nbrs[s];
                if (j == i) {
                    msgs_[s] = &node.est.psi;
                } else if (!topo_.is_byzantine(j)) {
                    msgs_[s] = &nodes_[static_cast<size_t>(j)].est.psi;
                } else if (attack_live && attack_->byzantine.count(j)) {
                    fab_buf_[fab_used] = fabricate_message(*attack_, j, i, node.est.w);
                    msgs_[s] = &fab_buf_[fab_used];
                    ++fab_used;
                }
                // silent byzantine neighbors stay absent (null message)
            }

            contributions_.clear();
            for (size_t s = 0; s < slots; ++s) {
                if (!msgs_[s]) continue;
                double dist_sq = (*msgs_[s] - node.est.w).squaredNorm();
                node.gamma_sq[static_cast<long>(s)] =
                    update_gamma_sq(node.gamma_sq[static_cast<long>(s)], combine_.nu,
                                    dist_sq);
                if (resilient) {
                    double c = cost_contribution(node.q_estimate[static_cast<long>(s)],
                                                 combine_.rho,
                                                 node.gamma_sq[static_cast<long>(s)],
                                                 message_sq_err(node, *msgs_[s]));
                    contributions_.emplace_back(nbrs[s], c);
                }
            }

            survivor_mask_.assign(slots, 0);
            for (size_t s = 0; s < slots; ++s)
                if (msgs_[s]) survivor_mask_[s] = 1;
            if (resilient && combine_.removal_count > 0) {
                auto removed = removal_set(contributions_, combine_.removal_count);
                for (int r : removed) {
                    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), r);
                    survivor_mask_[static_cast<size_t>(it - nbrs.begin())] = 0;
                }
            }

            combination_weights(node.gamma_sq, survivor_mask_, weight_buf_);

            node.w_next.setZero();
            double total = 0.0;
            for (size_t s = 0; s < slots; ++s) {
                double a = weight_buf_[static_cast<long>(s)];
                if (a == 0.0) continue;
                node.w_next.noalias() += a * (*msgs_[s]);
                total += a;
            }
            max_simplex_dev_ = std::max(max_simplex_dev_, std::abs(total - 1.0));

            weights_.row(i).setZero();
            for (size_t s = 0; s < slots; ++s)
                weights_(i, nbrs[s]) = weight_buf_[static_cast<long>(s)];
        }
        for (int i : topo_.normal_nodes()) {
            auto& node = nodes_[static_cast<size_t>(i)];
            node.est.w = node.w_next;
        }
    } else {
        for (int i : topo_.normal_nodes()) {
            auto& node = nodes_[static_cast<size_t>(i)];
            node.est.w = node.est.psi;
            weights_(i, i) = 1.0;
        }
    }

    for (int i : topo_.normal_nodes()) {
        auto& node = nodes_[static_cast<size_t>(i)];
        std::swap(node.current, node.next);
    }

    bool ok = check_divergence();
    ++iteration_;
    return ok;
}

bool World::check_divergence() {
    for (int i : topo_.normal_nodes()) {
        const auto& w = nodes_[static_cast<size_t>(i)].est.w;
        if (!w.allFinite() || w.norm() > divergence_threshold_) {
            divergence_ = DivergenceEvent{run_index_, iteration_, i};
            return false;
        }
    }
    return true;
}

}  // namespace diffnet
