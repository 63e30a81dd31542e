#pragma once

#include <cmath>
#include <cstdint>

namespace diffnet {

// Counter-derived splittable random stream. A stream is addressed by
// (root seed, run index, node id, channel) and its draw sequence depends
// only on that address, never on thread scheduling or on draws made by
// other streams. All transformations consume a fixed number of uniforms,
// so sequences are bit-identical across executions.
class RngStream {
public:
    enum Channel : std::uint64_t {
        kRegressor = 0,
        kNoise = 1,
        kInit = 2,
        kConfig = 3,
        kTopology = 4,
    };

    RngStream(std::uint64_t root_seed, std::uint64_t run, std::uint64_t node,
              std::uint64_t channel)
        : state_(derive(derive(derive(derive(0x9e3779b97f4a7c15ull ^ root_seed, 0x1905ull),
                                      run),
                               node),
                        channel)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1]; safe as a log argument
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; always consumes two uniforms
    double gaussian() {
        double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        double theta = 6.283185307179586476925286766559 * uniform01();
        return r * std::cos(theta);
    }

    // unit-rate exponential
    double exponential() { return -std::log(uniform_pos()); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t s, std::uint64_t v) {
        return mix(s * 0x100000001b3ull ^ mix(v + 0xa0761d6478bd642full));
    }

    std::uint64_t state_;
};

}  // namespace diffnet
