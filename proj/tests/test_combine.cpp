#include <doctest.h>

#include <cmath>

#include "diffnet/combine.hpp"
#include "diffnet/scenarios.hpp"

using namespace diffnet;

namespace {

IdealStates two_cluster_states() {
    IdealStates states;
    states.per_cluster["A"] = Eigen::Vector2d(0.1, 0.2);
    states.per_cluster["B"] = Eigen::Vector2d(0.7, 0.8);
    return states;
}

std::vector<AdaptParams> uniform_params(int n, double mu, double lambda) {
    return std::vector<AdaptParams>(static_cast<size_t>(n),
                                    AdaptParams{mu, lambda, Kernel::kLmg});
}

std::vector<NoiseModel> gaussian_noise(int n, double variance) {
    return std::vector<NoiseModel>(static_cast<size_t>(n), GaussianNoise{variance});
}

// trajectory of every normal node's estimate, concatenated per iteration
std::vector<Eigen::VectorXd> run_trajectory(const Topology& topo,
                                            const IdealStates& states,
                                            AlgorithmKind kind, CombineParams combine,
                                            const AttackSpec* attack, long iterations,
                                            std::uint64_t seed,
                                            double mu = 0.05, double lambda = 1.0) {
    LinearDataModel data(topo, states,
                         std::vector<double>(static_cast<size_t>(topo.num_nodes()), 1.0),
                         RegressorStyle::kIidGaussian,
                         gaussian_noise(topo.num_nodes(), 0.01), seed, 0);
    World world(topo, states, kind, uniform_params(topo.num_nodes(), mu, lambda),
                combine, data, attack, 1e6, 0);
    std::vector<Eigen::VectorXd> out;
    for (long t = 0; t < iterations; ++t) {
        world.run_iteration();
        Eigen::VectorXd snap(topo.num_normal() * states.dim());
        long at = 0;
        for (int i : topo.normal_nodes()) {
            snap.segment(at, states.dim()) = world.estimate(i);
            at += states.dim();
        }
        out.push_back(std::move(snap));
    }
    return out;
}

bool bitwise_equal(const std::vector<Eigen::VectorXd>& a,
                   const std::vector<Eigen::VectorXd>& b) {
    if (a.size() != b.size()) return false;
    for (size_t k = 0; k < a.size(); ++k)
        if (!(a[k].array() == b[k].array()).all()) return false;
    return true;
}

}  // namespace

TEST_CASE("distance memory update") {
    SUBCASE("full forgetting with a coincident message hits the floor") {
        CHECK(update_gamma_sq(5.0, 1.0, 0.0) == doctest::Approx(kGammaSqFloor));
    }
    SUBCASE("hand value") {
        CHECK(update_gamma_sq(1.0, 0.01, 4.0) == doctest::Approx(1.03));
    }
    SUBCASE("constant distance is the fixed point") {
        double g = 1.0;
        for (int k = 0; k < 3000; ++k) g = update_gamma_sq(g, 0.05, 0.42);
        CHECK(g == doctest::Approx(0.42).epsilon(1e-9));
    }
}

TEST_CASE("cost contribution") {
    double q = 0.0;
    SUBCASE("perfect prediction contributes nothing") {
        CHECK(cost_contribution(q, 0.0, 1.0, 0.0) == doctest::Approx(0.0));
    }
    SUBCASE("unit distance memory passes the squared error through") {
        CHECK(cost_contribution(q, 0.0, 1.0, 4.0) == doctest::Approx(4.0));
    }
    SUBCASE("inverse fourth power of the distance memory") {
        CHECK(cost_contribution(q, 0.0, 0.5, 1.0) == doctest::Approx(4.0));
    }
    SUBCASE("smoothing mixes old and new") {
        q = 2.0;
        cost_contribution(q, 0.5, 1.0, 4.0);
        CHECK(q == doctest::Approx(3.0));
    }
}

TEST_CASE("removal set") {
    SUBCASE("zero removals") {
        CHECK(removal_set({{1, 0.2}, {2, 5.0}}, 0).empty());
    }
    SUBCASE("argmax") {
        auto r = removal_set({{1, 0.2}, {2, 5.0}, {3, 0.1}}, 1);
        CHECK(r == std::vector<int>{2});
    }
    SUBCASE("tie breaks toward the lowest id") {
        auto r = removal_set({{1, 5.0}, {2, 5.0}}, 1);
        CHECK(r == std::vector<int>{1});
    }
    SUBCASE("never empties the survivors") {
        auto r = removal_set({{4, 1.0}, {7, 2.0}, {9, 3.0}}, 5);
        CHECK(r == std::vector<int>{7, 9});
        CHECK(removal_set({{3, 1.0}}, 1).empty());
    }
}

TEST_CASE("combination weights") {
    SUBCASE("equal memories give uniform weights") {
        Eigen::VectorXd g = Eigen::VectorXd::Constant(4, 0.7);
        std::vector<char> mask{1, 1, 1, 1};
        Eigen::VectorXd w;
        combination_weights(g, mask, w);
        for (int k = 0; k < 4; ++k) CHECK(w[k] == doctest::Approx(0.25));
    }
    SUBCASE("inverse square ratio") {
        Eigen::VectorXd g(2);
        g << 1.0, 4.0;
        std::vector<char> mask{1, 1};
        Eigen::VectorXd w;
        combination_weights(g, mask, w);
        CHECK(w[0] == doctest::Approx(0.8));
        CHECK(w[1] == doctest::Approx(0.2));
    }
    SUBCASE("single survivor takes everything") {
        Eigen::VectorXd g(3);
        g << 1.0, 2.0, 3.0;
        std::vector<char> mask{0, 1, 0};
        Eigen::VectorXd w;
        combination_weights(g, mask, w);
        CHECK(w[1] == doctest::Approx(1.0));
        CHECK(w[0] == 0.0);
    }
    SUBCASE("empty survivors is a contract violation") {
        Eigen::VectorXd g(2);
        g << 1.0, 1.0;
        std::vector<char> mask{0, 0};
        Eigen::VectorXd w;
        CHECK_THROWS_AS(combination_weights(g, mask, w), std::logic_error);
    }
}

TEST_CASE("combine step") {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(2);
    SUBCASE("single message with weight one") {
        auto out = combine_step({1.0}, {&b});
        CHECK((out - b).norm() == doctest::Approx(0.0));
    }
    SUBCASE("even mix") {
        auto out = combine_step({0.5, 0.5}, {&a, &b});
        CHECK(out[0] == doctest::Approx(0.5));
        CHECK(out[1] == doctest::Approx(0.5));
    }
    SUBCASE("stays in the convex hull componentwise") {
        Eigen::VectorXd c(2);
        c << -1.0, 3.0;
        auto out = combine_step({0.2, 0.5, 0.3}, {&a, &b, &c});
        for (int k = 0; k < 2; ++k) {
            double lo = std::min({a[k], b[k], c[k]});
            double hi = std::max({a[k], b[k], c[k]});
            CHECK(out[k] >= lo - 1e-15);
            CHECK(out[k] <= hi + 1e-15);
        }
    }
    SUBCASE("dimension mismatch") {
        Eigen::VectorXd d3 = Eigen::VectorXd::Zero(3);
        CHECK_THROWS_AS(combine_step({0.5, 0.5}, {&a, &d3}), std::invalid_argument);
    }
}

TEST_CASE("cooperative kinds degenerate to non-cooperative on trivial graphs") {
    IdealStates one;
    one.per_cluster["A"] = Eigen::Vector2d(0.3, -0.4);
    Topology single(1, {}, {"A"}, {});
    auto dlmg = run_trajectory(single, one, AlgorithmKind::kDlmg, CombineParams{},
                               nullptr, 50, 77);
    auto nclmg = run_trajectory(single, one, AlgorithmKind::kNcLmg, CombineParams{},
                                nullptr, 50, 77);
    CHECK(bitwise_equal(dlmg, nclmg));
}

TEST_CASE("non-cooperative runs ignore the edge set entirely") {
    auto states = two_cluster_states();
    Topology connected(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, {"A", "A", "B", "B"}, {});
    Topology edgeless(4, {}, {"A", "A", "B", "B"}, {});
    auto with_edges = run_trajectory(connected, states, AlgorithmKind::kNcLmg,
                                     CombineParams{}, nullptr, 60, 13);
    auto without = run_trajectory(edgeless, states, AlgorithmKind::kNcLmg,
                                  CombineParams{}, nullptr, 60, 13);
    CHECK(bitwise_equal(with_edges, without));
}

TEST_CASE("zero removals and no attackers reduce the resilient kind exactly") {
    auto states = two_cluster_states();
    Topology topo(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}, {1, 3}},
                  {"A", "A", "A", "B", "B"}, {});
    CombineParams no_removal;
    no_removal.removal_count = 0;
    auto rdlmg = run_trajectory(topo, states, AlgorithmKind::kRdlmg, no_removal, nullptr,
                                100, 21);
    auto dlmg = run_trajectory(topo, states, AlgorithmKind::kDlmg, CombineParams{},
                               nullptr, 100, 21);
    CHECK(bitwise_equal(rdlmg, dlmg));
}

TEST_CASE("weights stay on the simplex and removal counts hold") {
    auto states = two_cluster_states();
    Topology topo(6, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {3, 5}},
                  {"A", "A", "A", "B", "B", "B"}, {});
    LinearDataModel data(topo, states, std::vector<double>(6, 1.0),
                         RegressorStyle::kIidGaussian, gaussian_noise(6, 0.01), 3, 0);
    CombineParams combine;
    combine.removal_count = 2;
    World world(topo, states, AlgorithmKind::kRdlmg, uniform_params(6, 0.05, 1.0),
                combine, data, nullptr, 1e6, 0);
    for (int t = 0; t < 50; ++t) {
        world.run_iteration();
        for (int i = 0; i < 6; ++i) {
            double sum = world.weights().row(i).sum();
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            int survivors = 0;
            for (int j = 0; j < 6; ++j)
                if (world.weights()(i, j) > 0) ++survivors;
            int n_i = static_cast<int>(topo.neighbors(i).size());
            int expected_removed = std::min(combine.removal_count, n_i - 1);
            CHECK(survivors == n_i - expected_removed);
        }
    }
    CHECK(world.max_simplex_deviation() < 1e-12);
}

TEST_CASE("byzantine influence needs two iterations to travel two hops") {
    Topology line(3, {{0, 1}, {1, 2}}, {"A", "A", "A"}, {0});
    IdealStates single;
    single.per_cluster["A"] = Eigen::Vector2d(0.1, 0.2);

    AttackSpec attack;
    ByzantineBehavior b;
    b.shared_state = Eigen::Vector2d(5.0, 5.0);
    b.mu_a = 0.5;
    attack.byzantine[0] = std::move(b);

    auto attacked = run_trajectory(line, single, AlgorithmKind::kDlmg, CombineParams{},
                                   &attack, 2, 55);
    auto clean = run_trajectory(line, single, AlgorithmKind::kDlmg, CombineParams{},
                                nullptr, 2, 55);
    int dim = 2;
    // normal nodes are 1 and 2 -> segments 0 and 1 of each snapshot
    auto node2_at = [&](const std::vector<Eigen::VectorXd>& t, int iter) {
        return t[static_cast<size_t>(iter)].segment(1 * dim, dim);
    };
    auto node1_at = [&](const std::vector<Eigen::VectorXd>& t, int iter) {
        return t[static_cast<size_t>(iter)].segment(0 * dim, dim);
    };
    // one iteration in: the victim moved, the two-hop node did not
    CHECK((node1_at(attacked, 0) - node1_at(clean, 0)).norm() > 0);
    CHECK((node2_at(attacked, 0).array() == node2_at(clean, 0).array()).all());
    // two iterations in: the influence has propagated one more hop
    CHECK((node2_at(attacked, 1) - node2_at(clean, 1)).norm() > 0);
}

TEST_CASE("gradient attack captures its neighbors under plain diffusion") {
    // byzantine node 2 sits between two clusters; targets get pulled to w_a
    Topology topo(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}}, {"A", "A", "A", "B", "B"},
                  {2});
    auto states = two_cluster_states();
    AttackSpec attack;
    ByzantineBehavior b;
    b.shared_state = Eigen::Vector2d(0.4, 0.5);
    b.mu_a = 0.02;
    attack.byzantine[2] = std::move(b);

    CombineParams combine;
    combine.nu = 0.05;
    int captured = 0;
    const int runs = 6;
    for (int run = 0; run < runs; ++run) {
        LinearDataModel data(topo, states, std::vector<double>(5, 1.0),
                             RegressorStyle::kIidGaussian, gaussian_noise(5, 0.005), 31,
                             run);
        World world(topo, states, AlgorithmKind::kDlmg, uniform_params(5, 0.05, 1.0),
                    combine, data, &attack, 1e6, run);
        for (int t = 0; t < 2000; ++t) world.run_iteration();
        // victims: normal neighbors of node 2 are 0, 1, 3
        bool ok = true;
        for (int victim : {0, 1, 3}) {
            ok = ok && (world.estimate(victim) - attack.target_for(2, victim)).norm() < 0.08;
            ok = ok && world.weights()(victim, 2) > 0.85;
        }
        captured += ok;
    }
    CHECK(captured >= runs - 1);
}
