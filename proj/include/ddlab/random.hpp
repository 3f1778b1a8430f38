#pragma once

// Seeding, scalar samplers and the deterministic parallel trial loop.
//
// Every randomized routine derives one engine per trial from (master seed, stream, trial),
// so results never depend on how trials are scheduled across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace ddlab::random {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for trial `index` of logical stream `stream` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ (index * 0xd1b54a32d192ed03ULL));
}

inline Engine make_engine(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return Engine(derive_seed(master, stream, index));
}

// Stream identifiers, kept distinct so independent estimates never share draws.
namespace stream {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kResponse = 2;
inline constexpr std::uint64_t kOracle = 3;
inline constexpr std::uint64_t kChain = 4;
inline constexpr std::uint64_t kDpMinor = 5;
inline constexpr std::uint64_t kDpMean = 6;
inline constexpr std::uint64_t kBootstrap = 7;
inline constexpr std::uint64_t kAuxiliary = 8;
}  // namespace stream

inline double standard_normal(Engine& eng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    return n01(eng);
}

inline double uniform01(Engine& eng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

/// Poisson draw: sequential inversion below mean 30, the standard library's rejection
/// sampler above.
inline long poisson(Engine& eng, double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) return 0;
    if (mean == 0.0) return 0;
    if (mean < 30.0) {
        const double u = uniform01(eng);
        double p = std::exp(-mean);
        double cdf = p;
        long k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }
    std::poisson_distribution<long> pd(mean);
    return pd(eng);
}

/// Thread count from DDLAB_THREADS, falling back to 1.
inline unsigned default_threads() {
    if (const char* env = std::getenv("DDLAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. fn must only write to
/// per-index state; the first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::int64_t count, unsigned threads, Fn&& fn) {
    if (count <= 0) return;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::int64_t i = t; i < count; i += threads) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace ddlab::random
