#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

namespace permaloc {

// Dense row-major tensor, double precision. Activations are rank-3 (h, w, c);
// conv kernels rank-4 (kh, kw, c_in, c_out); biases rank-1.
struct Tensor {
    std::vector<int> dims;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
        v.assign(static_cast<size_t>(count(dims)), 0.0);
    }

    static long long count(const std::vector<int>& d) {
        long long n = 1;
        for (int x : d) {
            if (x <= 0) throw std::invalid_argument("tensor dims must be positive");
            n *= x;
        }
        return n;
    }

    int h() const { return dims.at(0); }
    int w() const { return dims.at(1); }
    int c() const { return dims.size() > 2 ? dims[2] : 1; }

    double& at3(int y, int x, int ch) { return v[(static_cast<size_t>(y) * dims[1] + x) * dims[2] + ch]; }
    const double& at3(int y, int x, int ch) const {
        return v[(static_cast<size_t>(y) * dims[1] + x) * dims[2] + ch];
    }
    double& at2(int y, int x) { return v[static_cast<size_t>(y) * dims[1] + x]; }
    const double& at2(int y, int x) const { return v[static_cast<size_t>(y) * dims[1] + x]; }
    // Kernel layout (ky, kx, c_in, c_out).
    double& at4(int a, int b, int c_, int d) {
        return v[((static_cast<size_t>(a) * dims[1] + b) * dims[2] + c_) * dims[3] + d];
    }
    const double& at4(int a, int b, int c_, int d) const {
        return v[((static_cast<size_t>(a) * dims[1] + b) * dims[2] + c_) * dims[3] + d];
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

} // namespace permaloc
