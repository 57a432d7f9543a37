#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fitrec/errors.hpp"

namespace fitrec {

/// Dense row-major tensor. Plain storage; layers interpret the shape.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s)
        : shape(std::move(s)), v(numel(shape), T(0)) {}

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeMismatch("negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

// ---- fixed-order kernels ----------------------------------------------------
// Every reduction below runs in one documented order (ascending k), so results
// are identical across runs and do not depend on how work might be scheduled.

/// y[m x n] += x[m x k] * w[k x n]
template <typename T>
inline void gemm_accum(const T* x, const T* w, T* y, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* xi = x + static_cast<std::size_t>(i) * k;
        T* yi = y + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const T a = xi[kk];
            const T* wk = w + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) yi[j] += a * wk[j];
        }
    }
}

/// y[m x k] += g[m x n] * w^T, with w stored [k x n]
template <typename T>
inline void gemm_accum_bt(const T* g, const T* w, T* y, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const T* gi = g + static_cast<std::size_t>(i) * n;
        T* yi = y + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const T* wk = w + static_cast<std::size_t>(kk) * n;
            T acc = 0;
            for (int j = 0; j < n; ++j) acc += gi[j] * wk[j];
            yi[kk] += acc;
        }
    }
}

/// dw[k x n] += x^T * g, with x stored [m x k], g stored [m x n]
template <typename T>
inline void gemm_accum_at(const T* x, const T* g, T* dw, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* xi = x + static_cast<std::size_t>(i) * k;
        const T* gi = g + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const T a = xi[kk];
            T* dwk = dw + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) dwk[j] += a * gi[j];
        }
    }
}

/// Numerically safe softmax (max subtraction), then cross-entropy against the
/// label. probs may alias nothing; returns the loss.
template <typename T>
inline T softmax_cross_entropy(const T* logits, int classes, int label, T* probs) {
    if (label < 0 || label >= classes) throw ShapeMismatch("label out of range");
    T mx = logits[0];
    for (int i = 1; i < classes; ++i) mx = std::max(mx, logits[i]);
    T sum = 0;
    for (int i = 0; i < classes; ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (int i = 0; i < classes; ++i) probs[i] /= sum;
    return std::log(sum) - (logits[label] - mx);
}

}  // namespace fitrec
