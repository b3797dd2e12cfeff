#include "c2f/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace c2f {

namespace {

thread_local bool tl_in_worker = false;

int read_thread_env() {
    const char* env = std::getenv("C2F_THREADS");
    long v = 0;
    if (env && *env) v = std::strtol(env, nullptr, 10);
    if (v <= 0) v = static_cast<long>(std::thread::hardware_concurrency());
    if (v < 1) v = 1;
    if (v > 256) v = 256;
    return static_cast<int>(v);
}

// Fixed pool of max_threads()-1 workers plus the calling thread. A task is a
// chunked index range; generation bumps wake the workers.
class Pool {
public:
    Pool() : nthreads_(read_thread_env()) {
        for (int i = 1; i < nthreads_; ++i) {
            workers_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    int size() const { return nthreads_; }

    void run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        const int slots = nthreads_;
        {
            std::lock_guard<std::mutex> lk(mu_);
            task_ = &fn;
            task_n_ = n;
            task_slots_ = slots;
            pending_.store(slots - 1, std::memory_order_relaxed);
            ++generation_;
        }
        cv_.notify_all();
        run_slot(0, n, slots, fn);
        while (pending_.load(std::memory_order_acquire) != 0) std::this_thread::yield();
        std::lock_guard<std::mutex> lk(mu_);
        task_ = nullptr;
    }

private:
    static void run_slot(int slot, std::int64_t n, int slots,
                         const std::function<void(std::int64_t, std::int64_t)>& fn) {
        const std::int64_t chunk = (n + slots - 1) / slots;
        const std::int64_t begin = slot * chunk;
        const std::int64_t end = std::min<std::int64_t>(n, begin + chunk);
        if (begin < end) fn(begin, end);
    }

    void worker_loop(int slot) {
        tl_in_worker = true;
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
            std::int64_t n = 0;
            int slots = 0;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
                fn = task_;
                n = task_n_;
                slots = task_slots_;
            }
            if (fn) {
                run_slot(slot, n, slots, *fn);
                pending_.fetch_sub(1, std::memory_order_release);
            }
        }
    }

    const int nthreads_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    const std::function<void(std::int64_t, std::int64_t)>* task_ = nullptr;
    std::int64_t task_n_ = 0;
    int task_slots_ = 1;
    std::atomic<int> pending_{0};
};

Pool& pool() {
    static Pool p;
    return p;
}

}  // namespace

int max_threads() { return pool().size(); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    // Nested calls from a worker run inline; the pool is not reentrant.
    if (n == 1 || tl_in_worker || pool().size() == 1) {
        fn(0, n);
        return;
    }
    pool().run(n, fn);
}

}  // namespace c2f
