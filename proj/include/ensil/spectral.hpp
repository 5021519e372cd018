#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace ensil {

// Real-to-complex FFT pair on an n0 x n1 periodic grid (n1 = 1 for 1-D).
// Plans are created under a global lock; execution is thread-safe per instance.
class RealFFT {
public:
    RealFFT(int n0, int n1);
    ~RealFFT();
    RealFFT(const RealFFT&) = delete;
    RealFFT& operator=(const RealFFT&) = delete;

    int n0() const { return n0_; }
    int n1() const { return n1_; }
    int n1c() const { return n1_ / 2 + 1; }  // complex extent along the last axis
    std::size_t real_size() const { return static_cast<std::size_t>(n0_) * n1_; }
    std::size_t spec_size() const { return static_cast<std::size_t>(n0_) * n1c(); }

    void forward(const double* in, std::complex<double>* out);
    // unnormalized; caller divides by real_size()
    void backward(const std::complex<double>* in, double* out);

private:
    int n0_, n1_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// angular wavenumber for index k of an n-point axis with spacing h
double wavenumber(int k, int n, double h);

}  // namespace ensil
