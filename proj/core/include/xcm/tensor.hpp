#ifndef XCM_TENSOR_HPP
#define XCM_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace xcm {

// Dense row-major tensor of doubles. The single numeric currency of the
// library; shapes are small (models here are tiny) so everything is a plain
// std::vector.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != checked_numel(shape))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // Row-major index helpers, rank-checked only by assert.
    double& at(int i, int j) {
        assert(rank() == 2);
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    const double& at(int i, int j) const {
        assert(rank() == 2);
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }
    double& at(int i, int j, int k) {
        assert(rank() == 3);
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const double& at(int i, int j, int k) const {
        assert(rank() == 3);
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double& at(int i, int j, int k, int l) {
        assert(rank() == 4);
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const double& at(int i, int j, int k, int l) const {
        assert(rank() == 4);
        return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    void add_scaled(const Tensor& o, double s) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

private:
    static std::int64_t checked_numel(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int e : s) {
            if (e <= 0) throw std::invalid_argument("tensor: shape extents must be positive");
            n *= e;
        }
        return n;
    }
};

}  // namespace xcm

#endif
