#ifndef DDMC_RNG_HPP
#define DDMC_RNG_HPP

#include <atomic>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "ddmc/dist.hpp"

namespace ddmc {

/// splitmix64 finalizer; used to mix (base seed, replica index, substream tag)
/// into independent engine seeds. Replica outputs therefore never depend on
/// scheduling order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = mix64(base);
    s = mix64(s ^ mix64(a ^ 0x243f6a8885a308d3ULL));
    s = mix64(s ^ mix64(b ^ 0x13198a2e03707344ULL));
    s = mix64(s ^ mix64(c ^ 0xa4093822299f31d0ULL));
    return s;
}

/// Uniform stream with quantile-based samplers. All variates derive from
/// open-(0,1) uniforms of a mt19937_64 engine.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() {
        const std::uint64_t x = engine_();
        return (double(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        return mean + sd * dist::normal_quantile(uniform());
    }

    double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

    std::int64_t poisson(double mean) { return dist::poisson_quantile(mean, uniform()); }

    std::uint64_t raw() { return engine_(); }

    /// Derive an independent child stream; advances this stream by one draw.
    RngStream spawn(std::uint64_t tag) { return RngStream(derive_seed(engine_(), tag)); }

  private:
    std::mt19937_64 engine_;
};

/// Run fn(replica, stream) for replica in [0, n). Streams are derived as
/// derive_seed(base, replica), so results do not depend on thread count.
template <typename Fn>
void for_each_replica(int n, std::uint64_t base_seed, int threads, Fn&& fn) {
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (threads == 1 || n <= 1) {
        for (int r = 0; r < n; ++r) {
            RngStream s(derive_seed(base_seed, std::uint64_t(r)));
            fn(r, s);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= n) return;
                RngStream s(derive_seed(base_seed, std::uint64_t(r)));
                fn(r, s);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ddmc

#endif
