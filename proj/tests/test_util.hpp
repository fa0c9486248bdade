#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "drd/tensor.hpp"

namespace drd::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool parameter = false) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(element_count(shape));
    for (auto& x : v) {
        x = n(rng);
    }
    return parameter ? Tensor::parameter(std::move(shape), std::move(v)) : Tensor(std::move(shape), std::move(v));
}

// Random d x d orthogonal matrix (QR of a Gaussian matrix).
inline Eigen::MatrixXd random_orthogonal(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = n(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    return qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

// Central differences of `f` at the chosen flat indices of `x`.
inline std::vector<double> numeric_gradient(Tensor x, const std::vector<std::size_t>& indices,
                                            const std::function<double()>& f, double h = 1e-5) {
    std::vector<double> out;
    auto data = x.mutable_data();
    for (std::size_t k : indices) {
        const double orig = data[k];
        data[k] = orig + h;
        const double up = f();
        data[k] = orig - h;
        const double down = f();
        data[k] = orig;
        out.push_back((up - down) / (2.0 * h));
    }
    return out;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) {
        all[i] = i;
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(count, n));
    return all;
}

}  // namespace drd::testing
