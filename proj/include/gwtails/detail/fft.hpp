#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace gwtails::detail {

// FFTW's planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Linear convolution of real sequences by a fixed-size real FFT.
/// Plans use FFTW_ESTIMATE so that results do not depend on timing.
class RealConvolver {
public:
    explicit RealConvolver(std::size_t size) : n_(next_pow2(std::max<std::size_t>(size, 2))) {
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n_)));
        spec_a_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n_ / 2 + 1))));
        spec_b_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n_ / 2 + 1))));
        if (!real_ || !spec_a_ || !spec_b_) throw std::bad_alloc();
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_.get(), spec_a_.get(), FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec_a_.get(), real_.get(), FFTW_ESTIMATE);
        if (!fwd_ || !inv_) throw std::runtime_error("fftw: plan creation failed");
    }
    ~RealConvolver() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }
    RealConvolver(const RealConvolver&) = delete;
    RealConvolver& operator=(const RealConvolver&) = delete;

    std::size_t size() const noexcept { return n_; }

    /// Stores the transform of b for repeated use with convolve_fixed.
    void set_fixed(const std::vector<double>& b) {
        load(b);
        fftw_execute_dft_r2c(fwd_, real_.get(), spec_b_.get());
    }

    /// (a * fixed)[offset .. offset + count).
    void convolve_fixed(const std::vector<double>& a, std::size_t offset, std::size_t count, double* out) {
        load(a);
        fftw_execute_dft_r2c(fwd_, real_.get(), spec_a_.get());
        multiply();
        fftw_execute_dft_c2r(inv_, spec_a_.get(), real_.get());
        const double scale = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < count; ++i) out[i] = real_.get()[offset + i] * scale;
    }

    /// (a * b)[0 .. count).
    std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b, std::size_t count) {
        if (a.size() + b.size() - 1 > n_) throw std::length_error("RealConvolver: transform too short");
        set_fixed(b);
        std::vector<double> out(count);
        convolve_fixed(a, 0, std::min(count, n_), out.data());
        return out;
    }

private:
    void load(const std::vector<double>& v) {
        if (v.size() > n_) throw std::length_error("RealConvolver: input longer than transform");
        std::copy(v.begin(), v.end(), real_.get());
        std::fill(real_.get() + v.size(), real_.get() + n_, 0.0);
    }
    void multiply() noexcept {
        auto* a = spec_a_.get();
        const auto* b = spec_b_.get();
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            const double re = a[k][0] * b[k][0] - a[k][1] * b[k][1];
            const double im = a[k][0] * b[k][1] + a[k][1] * b[k][0];
            a[k][0] = re;
            a[k][1] = im;
        }
    }

    std::size_t n_;
    std::unique_ptr<double, FftwFree> real_;
    std::unique_ptr<fftw_complex, FftwFree> spec_a_, spec_b_;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

}  // namespace gwtails::detail
