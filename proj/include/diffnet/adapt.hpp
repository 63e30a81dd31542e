#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace diffnet {

enum class Kernel { kLms, kLmg };

// How a multi-sample observation block feeds one adaptation step: average the
// per-sample robust gradients, or apply them sequentially within the step.
enum class BlockUpdateMode { kAverage, kSequential };

// Per-node adaptation parameters. lambda is the robust-loss shape parameter
// and is ignored by the LMS kernel.
struct AdaptParams {
    double mu = 0.01;
    double lambda = 1.0;
    Kernel kernel = Kernel::kLmg;
};

struct NodeEstimate {
    Eigen::VectorXd w;    // current estimate
    Eigen::VectorXd psi;  // intermediate estimate produced by the adapt step
};

inline double prediction_error(double d, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& w) {
    if (u.size() != w.size())
        throw std::invalid_argument("prediction_error: dimension mismatch");
    return d - u.dot(w);
}

// Bounded robust loss, 0.5 e^2 / (1 + lambda e^2); capped above by 0.5/lambda.
inline double gm_cost(double e, double lambda) {
    double e2 = e * e;
    return 0.5 * e2 / (1.0 + lambda * e2);
}

// Error-dependent step-size modulation, 1 / (1 + lambda e^2)^2. Equals the
// loss derivative divided by e; in (0, 1], monotone decreasing in |e|.
inline double gm_scale(double e, double lambda) {
    double q = 1.0 + lambda * e * e;
    return 1.0 / (q * q);
}

// One stochastic-gradient step into psi; w is left untouched. The LMS kernel
// uses unit scale, the LMG kernel shrinks the step as the error grows.
inline void adapt_step(NodeEstimate& state, const AdaptParams& params, double d,
                       const Eigen::VectorXd& u) {
    double e = prediction_error(d, u, state.w);
    double scale = params.kernel == Kernel::kLms ? 1.0 : gm_scale(e, params.lambda);
    state.psi = state.w + (params.mu * scale * e) * u;
}

}  // namespace diffnet
