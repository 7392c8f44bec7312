#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "twm/errors.hpp"

namespace twm {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

inline Vec scaled(std::span<const double> a, double s) {
    Vec out(a.begin(), a.end());
    for (double& x : out) x *= s;
    return out;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

/// Dense symmetric matrix, row-major. Symmetry is enforced at construction.
class SymMatrix {
public:
    explicit SymMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

    static SymMatrix identity(std::size_t n) {
        SymMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m.a_[i * n + i] = 1.0;
        return m;
    }

    /// Builds from row-major entries; throws if the data is not symmetric.
    static SymMatrix from_rows(const std::vector<Vec>& rows) {
        const std::size_t n = rows.size();
        SymMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != n) throw Error("SymMatrix: ragged rows");
            for (std::size_t j = 0; j < n; ++j) m.a_[i * n + j] = rows[i][j];
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::abs(m.a_[i * n + j] - m.a_[j * n + i]) >
                    1e-12 * (1.0 + std::abs(m.a_[i * n + j])))
                    throw Error("SymMatrix: entries are not symmetric");
        return m;
    }

    std::size_t size() const { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, double v) {
        a_[i * n_ + j] = v;
        a_[j * n_ + i] = v;
    }

    Vec mul(std::span<const double> x) const {
        Vec y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += a_[i * n_ + j] * x[j];
            y[i] = s;
        }
        return y;
    }

    /// Quadratic form x' M x.
    double quad(std::span<const double> x) const {
        const Vec y = mul(x);
        return dot(x, std::span<const double>(y));
    }

    void scale(double s) {
        for (double& v : a_) v *= s;
    }

    /// Cholesky-based positive definiteness test.
    bool positive_definite() const {
        std::vector<double> l(a_);
        for (std::size_t j = 0; j < n_; ++j) {
            double d = l[j * n_ + j];
            for (std::size_t k = 0; k < j; ++k) d -= l[j * n_ + k] * l[j * n_ + k];
            if (!(d > 0.0)) return false;
            const double lj = std::sqrt(d);
            l[j * n_ + j] = lj;
            for (std::size_t i = j + 1; i < n_; ++i) {
                double s = l[i * n_ + j];
                for (std::size_t k = 0; k < j; ++k) s -= l[i * n_ + k] * l[j * n_ + k];
                l[i * n_ + j] = s / lj;
            }
        }
        return true;
    }

    std::vector<Vec> rows() const {
        std::vector<Vec> out(n_, Vec(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) out[i][j] = a_[i * n_ + j];
        return out;
    }

private:
    std::size_t n_;
    std::vector<double> a_;
};

}  // namespace twm
