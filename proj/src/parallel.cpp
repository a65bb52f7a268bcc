#include "robustcredit/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace robustcredit {

int worker_count() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("ROBUSTCREDIT_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) n = std::min(n, cap);
        } catch (const std::exception&) {
        }
    }
    return n;
}

}  // namespace robustcredit
