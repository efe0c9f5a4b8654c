#ifndef SPINWG_PARALLEL_HPP
#define SPINWG_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace spinwg {

/// Runs body(0..jobs-1) on a bounded pool. Each job writes only its own
/// result slot, so outputs do not depend on scheduling. The first exception
/// wins and is rethrown after all workers drain.
inline void run_parallel(int threads, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 0) return;
    threads = std::max(1, std::min(threads, jobs));
    if (threads == 1) {
        for (int k = 0; k < jobs; ++k) body(k);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int k = next.fetch_add(1);
                if (k >= jobs || failed.load()) return;
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace spinwg

#endif
