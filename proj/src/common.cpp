#include "styleaug/common.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

namespace styleaug {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

void parallel_blocks(size_t n, int workers,
                     const std::function<void(size_t, size_t, int)>& fn) {
    if (n == 0) return;
    const int slots = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (slots == 1) {
        fn(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(slots);
    pool.reserve(slots);
    const size_t base = n / slots, rem = n % slots;
    size_t begin = 0;
    for (int s = 0; s < slots; ++s) {
        const size_t len = base + (static_cast<size_t>(s) < rem ? 1 : 0);
        const size_t end = begin + len;
        pool.emplace_back([&fn, &errors, begin, end, s] {
            try {
                fn(begin, end, s);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : pool) t.join();
    // rethrow the lowest-slot failure so the surfaced error is deterministic
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace styleaug
