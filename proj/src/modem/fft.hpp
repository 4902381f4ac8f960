#pragma once

// Thin RAII wrapper over FFTW real transforms.

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace sonic::modem::detail {

// FFTW's planner is not thread-safe; executing plans is.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard<std::mutex> lk(planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lk(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    double* time() { return in_; }
    std::complex<double>* freq() { return reinterpret_cast<std::complex<double>*>(out_); }

    void forward() { fftw_execute(fwd_); }
    // Unnormalised: forward then inverse scales by n.
    void inverse() { fftw_execute(inv_); }

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan fwd_, inv_;
};

}  // namespace sonic::modem::detail
