#include <doctest.h>

#include "diffnet/attack.hpp"
#include "diffnet/rng.hpp"

using namespace diffnet;

namespace {

AttackSpec single_attacker(int byz, Eigen::VectorXd target, double mu_a) {
    AttackSpec spec;
    ByzantineBehavior b;
    b.shared_state = std::move(target);
    b.mu_a = mu_a;
    spec.byzantine[byz] = std::move(b);
    return spec;
}

}  // namespace

TEST_CASE("fabricated message hand values") {
    Eigen::VectorXd w_a(2);
    w_a << 0.4, 0.5;

    SUBCASE("victim already at the malicious state: fixed point") {
        auto spec = single_attacker(9, w_a, 0.01);
        auto msg = fabricate_message(spec, 9, 1, w_a);
        CHECK((msg - w_a).norm() == doctest::Approx(0.0));
    }
    SUBCASE("small step nudges toward the malicious state") {
        auto spec = single_attacker(9, w_a, 0.01);
        Eigen::VectorXd w(2);
        w << 0.1, 0.2;
        auto msg = fabricate_message(spec, 9, 1, w);
        CHECK(msg[0] == doctest::Approx(0.103));
        CHECK(msg[1] == doctest::Approx(0.203));
    }
    SUBCASE("a full-size step lands on the malicious state at once") {
        auto spec = single_attacker(9, w_a, 1.0);  // degenerate, skips validate()
        Eigen::VectorXd w(2);
        w << -2.0, 3.0;
        auto msg = fabricate_message(spec, 9, 1, w);
        CHECK((msg - w_a).norm() == doctest::Approx(0.0));
    }
    SUBCASE("per-victim override takes precedence") {
        auto spec = single_attacker(9, w_a, 0.5);
        Eigen::VectorXd special(2);
        special << -1.0, -1.0;
        spec.byzantine[9].per_target[2] = special;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
        auto to_default = fabricate_message(spec, 9, 1, w);
        auto to_special = fabricate_message(spec, 9, 2, w);
        CHECK(to_default[0] == doctest::Approx(0.2));
        CHECK(to_special[0] == doctest::Approx(-0.5));
    }
}

TEST_CASE("message distance identity") {
    RngStream s(3, 0, 0, 0);
    for (int k = 0; k < 200; ++k) {
        Eigen::VectorXd w(3), w_a(3);
        for (int j = 0; j < 3; ++j) {
            w[j] = s.gaussian();
            w_a[j] = s.gaussian();
        }
        double mu_a = 0.01 + 0.98 * s.uniform01();
        auto spec = single_attacker(0, w_a, mu_a);
        auto msg = fabricate_message(spec, 0, 1, w);
        CHECK((msg - w).norm() == doctest::Approx(mu_a * (w - w_a).norm()));
    }
}

TEST_CASE("capture time bound") {
    CHECK(predicted_capture_time(0.5, 0.25) == 2);
    CHECK(predicted_capture_time(0.3, 1.0) == 0);
    CHECK(predicted_capture_time(0.01, 0.01) == 459);
    CHECK_THROWS_AS(predicted_capture_time(1.5, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(predicted_capture_time(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("spec validation") {
    Eigen::VectorXd w_a(2);
    w_a << 0.4, 0.5;
    auto spec = single_attacker(3, w_a, 0.01);
    spec.validate(2);
    CHECK_THROWS_AS(spec.validate(3), std::invalid_argument);

    auto bad_step = single_attacker(3, w_a, 1.0);
    CHECK_THROWS_AS(bad_step.validate(2), std::invalid_argument);

    AttackSpec empty_state;
    empty_state.byzantine[0] = ByzantineBehavior{};
    CHECK_THROWS_AS(empty_state.validate(2), std::invalid_argument);

    CHECK(!AttackSpec{}.enabled());
    CHECK(spec.active_at(0));
    spec.start_iteration = 100;
    CHECK(!spec.active_at(99));
    CHECK(spec.active_at(100));
}
