// Acceptance gate: runs every criterion at its pinned tolerance and prints
// one pass/fail line per criterion. Exit code 0 only if all pass.
#include "ddmc/acceptance.hpp"

#include <cstdio>
#include <thread>

int main() {
    const std::uint64_t seed = 20260810ULL;
    const int threads = int(std::thread::hardware_concurrency());
    const auto results = ddmc::acceptance::run_suite(true, seed, threads > 0 ? threads : 1);
    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] %-52s %7.2fs  %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.seconds,
                    r.detail.c_str());
        all = all && r.pass;
    }
    std::printf("%s\n", all ? "ACCEPTANCE: ALL CRITERIA PASS" : "ACCEPTANCE: FAILURES PRESENT");
    return all ? 0 : 1;
}
