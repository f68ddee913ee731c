#include "gaitprint/bspline.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace gaitprint {

Eigen::MatrixXd penalty_matrix(const BSplineBasis<double>& basis, int order)
{
    using Rule = boost::math::quadrature::gauss<double, 8>;
    if (2 * (basis.degree() - order) > 15)
        throw ConfigError("penalty_matrix: degree too high for the quadrature rule");
    const int K = basis.size();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(K, K);
    const auto& knots = basis.knots();
    const auto& x = Rule::abscissa();
    const auto& w = Rule::weights();
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const double a = knots[i];
        const double b = knots[i + 1];
        if (!(b > a))
            continue;
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (std::size_t k = 0; k < x.size(); ++k) {
            for (const double sign : {-1.0, 1.0}) {
                if (x[k] == 0.0 && sign > 0)
                    continue;
                // Nudge into the open span so the span lookup picks this piece.
                const double t = std::clamp(mid + sign * half * x[k], a + 1e-14 * (b - a), b - 1e-14 * (b - a));
                const Eigen::VectorXd d = basis.derivative(t, order);
                P.noalias() += (w[k] * half) * d * d.transpose();
            }
        }
    }
    return 0.5 * (P + P.transpose());
}

} // namespace gaitprint
