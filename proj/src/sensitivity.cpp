#include "cope/sensitivity.hpp"

#include <cmath>
#include <stdexcept>

namespace cope {

SensitivityBounds bounds_from_gamma(double gamma, const Eigen::MatrixXd& pi_b_marginal) {
    if (gamma < 1.0) throw std::invalid_argument("bounds_from_gamma: gamma must be >= 1");
    SensitivityBounds out;
    out.gamma = gamma;
    out.l.resize(pi_b_marginal.rows(), pi_b_marginal.cols());
    out.m.resize(pi_b_marginal.rows(), pi_b_marginal.cols());
    for (int s = 0; s < pi_b_marginal.rows(); ++s)
        for (int a = 0; a < pi_b_marginal.cols(); ++a) {
            const double pb = pi_b_marginal(s, a);
            if (!(pb > 0.0))
                throw OverlapError("bounds_from_gamma: pi_b(a|s) = 0 at (s=" + std::to_string(s) +
                                   ", a=" + std::to_string(a) + ")");
            const double odds = 1.0 / pb - 1.0;
            out.l(s, a) = 1.0 + odds / gamma;
            out.m(s, a) = 1.0 + odds * gamma;
        }
    return out;
}

SensitivityBounds bounds_for_occupancy(double gamma, const EmpiricalOccupancy& occ) {
    if (gamma < 1.0) throw std::invalid_argument("bounds_for_occupancy: gamma must be >= 1");
    SensitivityBounds out;
    out.gamma = gamma;
    out.l.resize(occ.n_s, occ.n_a);
    out.m.resize(occ.n_s, occ.n_a);
    for (int s = 0; s < occ.n_s; ++s)
        for (int a = 0; a < occ.n_a; ++a) {
            const double pb = occ.pi_b_marginal(s, a);
            if (pb > 0.0) {
                const double odds = 1.0 / pb - 1.0;
                out.l(s, a) = 1.0 + odds / gamma;
                out.m(s, a) = 1.0 + odds * gamma;
            } else {
                out.l(s, a) = out.m(s, a) = 1.0;  // off-support placeholder
            }
        }
    return out;
}

MarginalWeights nominal_weights(const Eigen::MatrixXd& pi_b_marginal) {
    const int n_s = static_cast<int>(pi_b_marginal.rows());
    const int n_a = static_cast<int>(pi_b_marginal.cols());
    MarginalWeights g(n_s, n_a);
    for (int k = 0; k < n_s; ++k)
        for (int a = 0; a < n_a; ++a)
            for (int j = 0; j < n_s; ++j) {
                const double pb = pi_b_marginal(j, a);
                g.g(k, a, j) = pb > 0.0 ? 1.0 / pb : 1.0;
            }
    return g;
}

std::string to_string(MomentForm form) {
    return form == MomentForm::per_next_state_action ? "per_next_state_action"
                                                     : "action_marginal";
}

std::vector<SupportEntry> support_entries(const EmpiricalOccupancy& occ) {
    std::vector<SupportEntry> support;
    Tensor3 layout(occ.n_s, occ.n_a, occ.n_s);
    for (int k = 0; k < occ.n_s; ++k)
        for (int a = 0; a < occ.n_a; ++a)
            for (int j = 0; j < occ.n_s; ++j)
                if (occ.p_jak(j, a, k) > 0.0)
                    support.push_back({k, a, j, layout.index(k, a, j)});
    return support;
}

MomentSystem moment_system(const EmpiricalOccupancy& occ, MomentForm form,
                           const std::vector<SupportEntry>& support) {
    const int n_s = occ.n_s, n_a = occ.n_a;
    const int n_g = static_cast<int>(support.size());
    MomentSystem sys;
    if (form == MomentForm::per_next_state_action) {
        Eigen::VectorXd p_a = Eigen::VectorXd::Zero(n_a);
        Eigen::MatrixXd p_ak = Eigen::MatrixXd::Zero(n_a, n_s);
        for (int j = 0; j < n_s; ++j)
            for (int a = 0; a < n_a; ++a)
                for (int k = 0; k < n_s; ++k) {
                    p_a[a] += occ.p_jak(j, a, k);
                    p_ak(a, k) += occ.p_jak(j, a, k);
                }
        sys.rows = Eigen::MatrixXd::Zero(n_s * n_a, n_g);
        sys.rhs.resize(n_s * n_a);
        for (int k = 0; k < n_s; ++k)
            for (int a = 0; a < n_a; ++a)
                sys.rhs[k * n_a + a] = p_a[a] > 0.0 ? p_ak(a, k) / p_a[a] : 0.0;
        for (int c = 0; c < n_g; ++c) {
            const auto& e = support[c];
            sys.rows(e.k * n_a + e.a, c) = occ.p_jak(e.j, e.a, e.k);
        }
    } else {
        sys.rows = Eigen::MatrixXd::Zero(n_a, n_g);
        sys.rhs = Eigen::VectorXd::Ones(n_a);
        for (int c = 0; c < n_g; ++c) {
            const auto& e = support[c];
            sys.rows(e.a, c) = occ.p_jak(e.j, e.a, e.k);
        }
    }
    return sys;
}

MembershipReport is_in_ambiguity_set(const MarginalWeights& g, const EmpiricalOccupancy& occ,
                                     const SensitivityBounds& bounds, double tol,
                                     MomentForm form) {
    if (g.n_s() != occ.n_s || g.n_a() != occ.n_a || bounds.n_s() != occ.n_s ||
        bounds.n_a() != occ.n_a)
        throw std::invalid_argument("is_in_ambiguity_set: dimension mismatch");
    MembershipReport report;
    auto record = [&](ConstraintViolation v) {
        report.member = false;
        report.max_violation = std::max(report.max_violation, v.magnitude);
        report.violations.push_back(v);
    };
    for (int k = 0; k < occ.n_s; ++k)
        for (int a = 0; a < occ.n_a; ++a)
            for (int j = 0; j < occ.n_s; ++j) {
                if (occ.p_jak(j, a, k) <= 0.0) continue;
                const double v = g.g(k, a, j);
                if (v < bounds.l(j, a) - tol)
                    record({ConstraintViolation::Kind::box_lower, k, a, j, bounds.l(j, a) - v});
                if (v > bounds.m(j, a) + tol)
                    record({ConstraintViolation::Kind::box_upper, k, a, j, v - bounds.m(j, a)});
            }

    const auto support = support_entries(occ);
    const auto moments = moment_system(occ, form, support);
    Eigen::VectorXd gs(static_cast<int>(support.size()));
    for (size_t c = 0; c < support.size(); ++c)
        gs[static_cast<int>(c)] = g.g.flat()[support[c].flat];
    const Eigen::VectorXd resid = moments.rows * gs - moments.rhs;
    for (int r = 0; r < resid.size(); ++r) {
        if (std::abs(resid[r]) > tol) {
            ConstraintViolation v{ConstraintViolation::Kind::moment, -1, -1, -1,
                                  std::abs(resid[r])};
            if (form == MomentForm::per_next_state_action) {
                v.k = r / occ.n_a;
                v.a = r % occ.n_a;
            } else {
                v.a = r;
            }
            record(v);
        }
    }
    return report;
}

}  // namespace cope
