#pragma once

#include <atomic>
#include <cstdint>
#include <complex>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <cmath>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace gentle {

using cdouble = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

// ----------------------------------------------------------------------------
// Seeded randomness.  Every random draw in the library flows from one root
// seed through derive_seed(root, stage, index), so partial re-runs and
// parallel schedules stay reproducible.
// ----------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::uint64_t index = 0) {
    return splitmix64(root ^ splitmix64(fnv1a64(stage) + 0x632be59bd9b4e019ull * (index + 1)));
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view stage, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(root, stage, index));
}

// ----------------------------------------------------------------------------
// Worker pool.  Items are independent and indexed; results land in
// caller-owned slots, so the schedule never affects the output.
// ----------------------------------------------------------------------------

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 1) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < nw; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// Uniform time grid t = dt, 2dt, ..., up to T (inclusive within rounding).
inline std::vector<double> time_grid(double T, double dt) {
    std::vector<double> out;
    int n = static_cast<int>(std::round(T / dt));
    for (int k = 1; k <= n; ++k) out.push_back(k * dt);
    return out;
}

// Error categories named by the operation contracts.
struct invalid_argument_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace gentle
