#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstring>
#include <mutex>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace bslab {

namespace detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    fftw_complex* data = nullptr;
    std::size_t size = 0;

    explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)), size(n) {}
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    std::complex<double>* get() { return reinterpret_cast<std::complex<double>*>(data); }
};

}  // namespace detail

/// Square 2D complex transform on an n x n grid, index = iy * n + ix.
/// forward() divides by n^2 so that coefficients are those of e^{i k.x}.
class Fft2D {
public:
    explicit Fft2D(int n) : n_(n), buf_(static_cast<std::size_t>(n) * n) {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fwd_ = fftw_plan_dft_2d(n, n, buf_.data, buf_.data, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n, n, buf_.data, buf_.data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    ~Fft2D() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    int n() const { return n_; }
    std::size_t size() const { return buf_.size; }

    void forward(const std::complex<double>* in, std::complex<double>* out) {
        std::copy(in, in + size(), buf_.get());
        fftw_execute(fwd_);
        const double s = 1.0 / static_cast<double>(size());
        auto* b = buf_.get();
        for (std::size_t i = 0; i < size(); ++i) out[i] = b[i] * s;
    }

    void backward(const std::complex<double>* in, std::complex<double>* out) {
        std::copy(in, in + size(), buf_.get());
        fftw_execute(bwd_);
        std::copy(buf_.get(), buf_.get() + size(), out);
    }

    /// Two real fields through one complex transform.
    void forward_real_pair(const double* a, const double* b, std::complex<double>* ahat, std::complex<double>* bhat) {
        auto* z = buf_.get();
        for (std::size_t i = 0; i < size(); ++i) z[i] = {a[i], b[i]};
        fftw_execute(fwd_);
        const double s = 0.5 / static_cast<double>(size());
        for (int iy = 0; iy < n_; ++iy) {
            const int my = (n_ - iy) % n_;
            for (int ix = 0; ix < n_; ++ix) {
                const int mx = (n_ - ix) % n_;
                const auto zk = z[iy * n_ + ix];
                const auto zm = std::conj(z[my * n_ + mx]);
                ahat[iy * n_ + ix] = (zk + zm) * s;
                bhat[iy * n_ + ix] = (zk - zm) * std::complex<double>(0.0, -s);
            }
        }
    }

    /// Inverse of two Hermitian spectra, producing real samples.
    void backward_real_pair(const std::complex<double>* ahat, const std::complex<double>* bhat, double* a, double* b) {
        auto* z = buf_.get();
        const std::complex<double> I(0.0, 1.0);
        for (std::size_t i = 0; i < size(); ++i) z[i] = ahat[i] + I * bhat[i];
        fftw_execute(bwd_);
        for (std::size_t i = 0; i < size(); ++i) {
            a[i] = z[i].real();
            b[i] = z[i].imag();
        }
    }

private:
    int n_;
    detail::FftwBuffer buf_;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

}  // namespace bslab
