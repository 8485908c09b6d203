#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace cope {

/// Dense rank-3 tensor of doubles with row-major (i,j,k) layout.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int d0, int d1, int d2, double fill = 0.0)
        : d0_(d0), d1_(d1), d2_(d2), data_(static_cast<size_t>(d0) * d1 * d2, fill) {
        assert(d0 >= 0 && d1 >= 0 && d2 >= 0);
    }

    double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

    int dim0() const { return d0_; }
    int dim1() const { return d1_; }
    int dim2() const { return d2_; }
    size_t size() const { return data_.size(); }

    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    size_t index(int i, int j, int k) const {
        assert(i >= 0 && i < d0_ && j >= 0 && j < d1_ && k >= 0 && k < d2_);
        return (static_cast<size_t>(i) * d1_ + j) * d2_ + k;
    }

    bool same_shape(const Tensor3& other) const {
        return d0_ == other.d0_ && d1_ == other.d1_ && d2_ == other.d2_;
    }

private:
    int d0_ = 0, d1_ = 0, d2_ = 0;
    std::vector<double> data_;
};

}  // namespace cope
