#include "diffnet/util.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <vector>

namespace diffnet {

namespace {

inline std::uint32_t rol(std::uint32_t x, int s) { return (x << s) | (x >> (32 - s)); }

}  // namespace

std::string sha1_hex(const std::string& data) {
    std::array<std::uint32_t, 5> h = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                                      0xC3D2E1F0u};
    std::vector<unsigned char> msg(data.begin(), data.end());
    std::uint64_t bit_len = static_cast<std::uint64_t>(msg.size()) * 8;
    msg.push_back(0x80);
    while (msg.size() % 64 != 56) msg.push_back(0);
    for (int i = 7; i >= 0; --i)
        msg.push_back(static_cast<unsigned char>((bit_len >> (8 * i)) & 0xff));

    for (size_t chunk = 0; chunk < msg.size(); chunk += 64) {
        std::uint32_t w[80];
        for (int t = 0; t < 16; ++t)
            w[t] = (static_cast<std::uint32_t>(msg[chunk + 4 * t]) << 24) |
                   (static_cast<std::uint32_t>(msg[chunk + 4 * t + 1]) << 16) |
                   (static_cast<std::uint32_t>(msg[chunk + 4 * t + 2]) << 8) |
                   static_cast<std::uint32_t>(msg[chunk + 4 * t + 3]);
        for (int t = 16; t < 80; ++t)
            w[t] = rol(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1);

        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int t = 0; t < 80; ++t) {
            std::uint32_t f, k;
            if (t < 20) {
                f = (b & c) | ((~b) & d);
                k = 0x5A827999u;
            } else if (t < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (t < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            std::uint32_t tmp = rol(a, 5) + f + e + k + w[t];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = tmp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    char out[41];
    std::snprintf(out, sizeof(out), "%08x%08x%08x%08x%08x", h[0], h[1], h[2], h[3], h[4]);
    return std::string(out);
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf);
}

}  // namespace diffnet
