#include "diffnet/attack.hpp"

#include <cmath>
#include <string>

namespace diffnet {

const ByzantineBehavior& AttackSpec::behavior(int byz_id) const {
    auto it = byzantine.find(byz_id);
    if (it == byzantine.end())
        throw std::invalid_argument("attack: node " + std::to_string(byz_id) +
                                    " has no byzantine behavior");
    return it->second;
}

const Eigen::VectorXd& AttackSpec::target_for(int byz_id, int victim) const {
    const auto& b = behavior(byz_id);
    auto it = b.per_target.find(victim);
    if (it != b.per_target.end()) return it->second;
    if (b.shared_state.size() == 0)
        throw std::invalid_argument("attack: no malicious state for victim " +
                                    std::to_string(victim));
    return b.shared_state;
}

void AttackSpec::validate(int state_dim) const {
    if (start_iteration < 0)
        throw std::invalid_argument("attack: start_iteration must be >= 0");
    for (const auto& [id, b] : byzantine) {
        if (!(b.mu_a > 0.0) || !(b.mu_a < 1.0))
            throw std::invalid_argument("attack: mu_a must lie in (0,1) for node " +
                                        std::to_string(id));
        if (b.shared_state.size() == 0 && b.per_target.empty())
            throw std::invalid_argument("attack: node " + std::to_string(id) +
                                        " has no malicious state");
        if (b.shared_state.size() != 0 && b.shared_state.size() != state_dim)
            throw std::invalid_argument("attack: malicious state dimension mismatch");
        for (const auto& [victim, v] : b.per_target)
            if (v.size() != state_dim)
                throw std::invalid_argument(
                    "attack: per-target state dimension mismatch for victim " +
                    std::to_string(victim));
    }
}

Eigen::VectorXd fabricate_message(const AttackSpec& spec, int byz_id, int victim,
                                  const Eigen::VectorXd& victim_w) {
    const auto& b = spec.behavior(byz_id);
    const Eigen::VectorXd& target = spec.target_for(byz_id, victim);
    return victim_w - b.mu_a * (victim_w - target);
}

long predicted_capture_time(double mu_a, double eps) {
    if (!(mu_a > 0.0) || !(mu_a < 1.0))
        throw std::invalid_argument("predicted_capture_time: mu_a must lie in (0,1)");
    if (!(eps > 0.0) || eps > 1.0)
        throw std::invalid_argument("predicted_capture_time: eps must lie in (0,1]");
    if (eps >= 1.0) return 0;
    double n = std::log(eps) / std::log1p(-mu_a);
    long candidate = static_cast<long>(std::ceil(n - 1e-12));
    // guard the edge where floating point lands us one step short
    while (std::pow(1.0 - mu_a, static_cast<double>(candidate)) > eps) ++candidate;
    return candidate;
}

}  // namespace diffnet
