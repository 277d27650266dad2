#include "nbtoa/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace nbtoa::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) {
            fftw_destroy_plan(plan);
        }
    }

    fftw_plan get(int n, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) {
            return it->second;
        }
        std::vector<cplx> in(static_cast<std::size_t>(n));
        std::vector<cplx> out(static_cast<std::size_t>(n));
        fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()), sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex                                 mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

std::vector<cplx> execute(std::span<const cplx> x, int sign) {
    const int         n    = static_cast<int>(x.size());
    fftw_plan         plan = cache().get(n, sign);
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> out(x.size());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

} // namespace

std::vector<cplx> forward(std::span<const cplx> x) {
    if (x.empty()) {
        return {};
    }
    return execute(x, FFTW_FORWARD);
}

std::vector<cplx> inverse(std::span<const cplx> X) {
    if (X.empty()) {
        return {};
    }
    auto       out   = execute(X, FFTW_BACKWARD);
    const auto scale = 1.0 / static_cast<double>(X.size());
    for (auto& v : out) {
        v *= scale;
    }
    return out;
}

std::size_t fast_size(std::size_t n) {
    if (n <= 1) {
        return 1;
    }
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2U, 3U, 5U, 7U}) {
            while (r % p == 0) {
                r /= p;
            }
        }
        if (r == 1) {
            return m;
        }
    }
}

double bin_frequency(std::size_t k, std::size_t n, double rate) {
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    auto       kk   = static_cast<std::ptrdiff_t>(k);
    if (kk >= half && !(n % 2 == 1 && kk == half)) {
        kk -= static_cast<std::ptrdiff_t>(n);
    }
    return static_cast<double>(kk) * rate / static_cast<double>(n);
}

} // namespace nbtoa::fft
