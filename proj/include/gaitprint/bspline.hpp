#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gaitprint/error.hpp"

namespace gaitprint {

/// Univariate B-spline basis on a non-decreasing knot vector. The open
/// uniform constructor repeats each end knot degree+1 times.
template <typename Scalar = double>
class BSplineBasis {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    BSplineBasis() = default;

    BSplineBasis(int degree, int num_basis, Scalar lo, Scalar hi)
        : degree_(degree)
    {
        if (degree < 0 || num_basis < degree + 1 || !(hi > lo))
            throw ConfigError("BSplineBasis: need num_basis >= degree + 1 and hi > lo");
        const int interior = num_basis - degree - 1;
        knots_.assign(static_cast<std::size_t>(degree + 1), lo);
        for (int k = 1; k <= interior; ++k)
            knots_.push_back(lo + (hi - lo) * Scalar(k) / Scalar(interior + 1));
        knots_.insert(knots_.end(), static_cast<std::size_t>(degree + 1), hi);
    }

    BSplineBasis(int degree, std::vector<Scalar> knots)
        : degree_(degree), knots_(std::move(knots))
    {
        if (degree < 0 || static_cast<int>(knots_.size()) < 2 * degree + 2
            || !std::is_sorted(knots_.begin(), knots_.end()) || !(hi() > lo()))
            throw ConfigError("BSplineBasis: invalid knot vector");
    }

    int degree() const { return degree_; }
    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    const std::vector<Scalar>& knots() const { return knots_; }
    Scalar lo() const { return knots_[static_cast<std::size_t>(degree_)]; }
    Scalar hi() const { return knots_[knots_.size() - static_cast<std::size_t>(degree_) - 1]; }

    Scalar clamp(Scalar t) const { return std::clamp(t, lo(), hi()); }
    bool in_domain(Scalar t) const { return t >= lo() && t <= hi(); }

    /// Knot span i with knots[i] <= t < knots[i+1], degree <= i < size();
    /// the right end maps to the last non-empty span.
    int span(Scalar t) const
    {
        const int n = size();
        if (t >= knots_[static_cast<std::size_t>(n)])
            return n - 1;
        const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, t);
        return std::max(degree_, static_cast<int>(it - knots_.begin()) - 1);
    }

    /// Writes the degree+1 possibly non-zero basis values at (clamped) t into
    /// `values` and returns the index of the first one.
    int eval_nonzero(Scalar t, Scalar* values) const
    {
        t = clamp(t);
        const int i = span(t);
        const int p = degree_;
        Scalar left[32], right[32];
        if (p >= 32)
            throw ConfigError("BSplineBasis: degree too large");
        values[0] = Scalar(1);
        for (int j = 1; j <= p; ++j) {
            left[j] = t - knots_[static_cast<std::size_t>(i + 1 - j)];
            right[j] = knots_[static_cast<std::size_t>(i + j)] - t;
            Scalar saved(0);
            for (int r = 0; r < j; ++r) {
                const Scalar temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        return i - p;
    }

    Vector eval(Scalar t) const
    {
        Vector out = Vector::Zero(size());
        Scalar local[32];
        const int first = eval_nonzero(t, local);
        for (int k = 0; k <= degree_; ++k)
            out[first + k] = local[k];
        return out;
    }

    /// order-th derivative of every basis function at (clamped) t.
    Vector derivative(Scalar t, int order) const
    {
        if (order < 0)
            throw ConfigError("BSplineBasis: negative derivative order");
        if (order > degree_)
            return Vector::Zero(size());
        t = clamp(t);
        const auto m = static_cast<int>(knots_.size());
        // Degree-0 indicators on the span containing t.
        const int i0 = span(t);
        Vector vals = Vector::Zero(m - 1);
        vals[i0] = Scalar(1);
        // Raise the degree to degree - order with Cox-de Boor.
        for (int q = 1; q <= degree_ - order; ++q) {
            Vector next = Vector::Zero(m - q - 1);
            for (int i = 0; i < m - q - 1; ++i) {
                const Scalar a = ratio(t - knots_[static_cast<std::size_t>(i)],
                                       knots_[static_cast<std::size_t>(i + q)] - knots_[static_cast<std::size_t>(i)]);
                const Scalar b = ratio(knots_[static_cast<std::size_t>(i + q + 1)] - t,
                                       knots_[static_cast<std::size_t>(i + q + 1)] - knots_[static_cast<std::size_t>(i + 1)]);
                next[i] = a * vals[i] + b * vals[i + 1];
            }
            vals = std::move(next);
        }
        // Differentiate: d/dt B_{i,q} = q (B_{i,q-1}/(k_{i+q}-k_i) - B_{i+1,q-1}/(k_{i+q+1}-k_{i+1})).
        for (int q = degree_ - order + 1; q <= degree_; ++q) {
            Vector next = Vector::Zero(m - q - 1);
            for (int i = 0; i < m - q - 1; ++i) {
                const Scalar a = ratio(vals[i], knots_[static_cast<std::size_t>(i + q)] - knots_[static_cast<std::size_t>(i)]);
                const Scalar b = ratio(vals[i + 1], knots_[static_cast<std::size_t>(i + q + 1)] - knots_[static_cast<std::size_t>(i + 1)]);
                next[i] = Scalar(q) * (a - b);
            }
            vals = std::move(next);
        }
        return vals;
    }

    /// Knot averages; sum_k greville_k B_k(t) = t.
    Vector greville() const
    {
        Vector g(size());
        for (int k = 0; k < size(); ++k) {
            Scalar s(0);
            for (int j = 1; j <= degree_; ++j)
                s += knots_[static_cast<std::size_t>(k + j)];
            g[k] = degree_ > 0 ? s / Scalar(degree_) : knots_[static_cast<std::size_t>(k)];
        }
        return g;
    }

private:
    static Scalar ratio(Scalar num, Scalar den) { return den > Scalar(0) ? num / den : Scalar(0); }

    int degree_ = 3;
    std::vector<Scalar> knots_;
};

/// P[k, l] = integral of B_k^(order)(t) B_l^(order)(t) over the domain, by
/// Gauss-Legendre on each knot span (exact for the piecewise polynomials).
Eigen::MatrixXd penalty_matrix(const BSplineBasis<double>& basis, int order = 2);

} // namespace gaitprint
