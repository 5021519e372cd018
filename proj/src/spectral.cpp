#include "ensil/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace ensil {

namespace {
std::mutex& planner_lock()
{
    static std::mutex m;
    return m;
}
}  // namespace

struct RealFFT::Impl {
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

RealFFT::RealFFT(int n0, int n1) : n0_(n0), n1_(n1), impl_(std::make_unique<Impl>())
{
    if (n0 < 1 || n1 < 1) throw std::invalid_argument("FFT extent must be positive");
    std::lock_guard<std::mutex> g(planner_lock());
    impl_->rbuf = fftw_alloc_real(real_size());
    impl_->cbuf = fftw_alloc_complex(spec_size());
    if (n1 == 1) {
        impl_->fwd = fftw_plan_dft_r2c_1d(n0, impl_->rbuf, impl_->cbuf, FFTW_ESTIMATE);
        impl_->bwd = fftw_plan_dft_c2r_1d(n0, impl_->cbuf, impl_->rbuf, FFTW_ESTIMATE);
    } else {
        impl_->fwd = fftw_plan_dft_r2c_2d(n0, n1, impl_->rbuf, impl_->cbuf, FFTW_ESTIMATE);
        impl_->bwd = fftw_plan_dft_c2r_2d(n0, n1, impl_->cbuf, impl_->rbuf, FFTW_ESTIMATE);
    }
    if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("FFTW planning failed");
}

RealFFT::~RealFFT()
{
    std::lock_guard<std::mutex> g(planner_lock());
    if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
    if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
    fftw_free(impl_->rbuf);
    fftw_free(impl_->cbuf);
}

void RealFFT::forward(const double* in, std::complex<double>* out)
{
    // 1-D r2c: index k of the output is wavenumber k (k <= n/2).
    // 2-D r2c: out[i * n1c + j], i full range, j half range.
    std::memcpy(impl_->rbuf, in, real_size() * sizeof(double));
    fftw_execute(impl_->fwd);
    std::memcpy(static_cast<void*>(out), impl_->cbuf, spec_size() * sizeof(fftw_complex));
}

void RealFFT::backward(const std::complex<double>* in, double* out)
{
    // c2r destroys its input, so it always works on the private copy
    std::memcpy(impl_->cbuf, static_cast<const void*>(in), spec_size() * sizeof(fftw_complex));
    fftw_execute(impl_->bwd);
    std::memcpy(out, impl_->rbuf, real_size() * sizeof(double));
}

double wavenumber(int k, int n, double h)
{
    int kk = k <= n / 2 ? k : k - n;
    return 2.0 * std::numbers::pi * kk / (n * h);
}

}  // namespace ensil
