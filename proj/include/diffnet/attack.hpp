#pragma once

#include <map>
#include <stdexcept>

#include <Eigen/Core>

namespace diffnet {

// Behavior of one Byzantine node: a malicious target state per victim (or a
// shared one) and the attack step controlling how gently the victim is pulled.
struct ByzantineBehavior {
    Eigen::VectorXd shared_state;                 // used when no per-victim entry
    std::map<int, Eigen::VectorXd> per_target;    // victim -> malicious state
    double mu_a = 0.01;                           // in (0, 1)
};

struct AttackSpec {
    std::map<int, ByzantineBehavior> byzantine;   // byzantine node -> behavior
    long start_iteration = 0;

    bool enabled() const { return !byzantine.empty(); }
    bool active_at(long iteration) const {
        return enabled() && iteration >= start_iteration;
    }
    const ByzantineBehavior& behavior(int byz_id) const;
    const Eigen::VectorXd& target_for(int byz_id, int victim) const;
    void validate(int state_dim) const;
};

// Message a Byzantine node sends to one normal neighbor: the victim's own
// estimate nudged a fraction mu_a toward the malicious state. Each victim
// gets its own message.
Eigen::VectorXd fabricate_message(const AttackSpec& spec, int byz_id, int victim,
                                  const Eigen::VectorXd& victim_w);

// Smallest n with (1 - mu_a)^n <= eps: how long the geometric pull needs to
// erase a fraction 1-eps of the initial distance.
long predicted_capture_time(double mu_a, double eps);

}  // namespace diffnet
