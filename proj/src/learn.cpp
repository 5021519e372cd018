#include "ensil/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ensil {

SmoothedTerms smooth_and_integrate(const TermMatrix& terms, int n)
{
    const std::size_t m = terms.times.size();
    if (static_cast<std::size_t>(terms.columns.rows()) != m) throw std::invalid_argument("term rows != times");
    if (m < 2) throw std::invalid_argument("need at least two samples");
    SmoothedTerms out;
    out.order = effective_order(n, m);
    if (static_cast<int>(m) < out.order + 1) throw std::invalid_argument("need at least n+1 samples");
    Projector pr(terms.times, out.order, {terms.times.front(), terms.times.back()});
    Mat coeffs = pr.fit_many(terms.columns);
    out.values = pr.basis() * coeffs;
    out.integrals.resize(static_cast<Eigen::Index>(m), terms.columns.cols());
    for (Eigen::Index j = 0; j < coeffs.cols(); ++j) {
        LegendreSeries s{coeffs.col(j), terms.times.front(), terms.times.back()};
        LegendreSeries a = antiderivative(s);
        out.series.push_back(s);
        out.integrals.col(j) = eval_series(a, terms.times);
        out.integrals(0, j) = 0.0;
    }
    return out;
}

static double sign_of(SignMode m)
{
    switch (m) {
    case SignMode::dissipative: return 1.0;
    case SignMode::production: return -1.0;
    default: return 0.0;
    }
}

EnsilLoss::EnsilLoss(const EnsilProblem& prob)
    : free_offset_(prob.free_offset), sign_(sign_of(prob.sign_mode)), w_(prob.weights),
      constraint_(prob.apply_constraint_loss)
{
    if (w_.data < 0 || w_.thermo < 0 || w_.constraint < 0) throw std::invalid_argument("loss weights must be >= 0");
    const auto m = static_cast<Eigen::Index>(prob.entropy.times.size());
    if (prob.terms.times.size() != prob.entropy.times.size() || prob.entropy.S.size() != m)
        throw std::invalid_argument("entropy and term times differ");
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(prob.terms.times[i] - prob.entropy.times[i]) > 1e-9 * std::max(1.0, std::abs(prob.entropy.times[i])))
            throw std::invalid_argument("entropy and term times differ");
    if (prob.terms.columns.cols() < 1) throw std::invalid_argument("need at least one term column");
    sm_ = smooth_and_integrate(prob.terms, prob.legendre_order);
    S0_ = prob.entropy.S[0];
    y_ = prob.entropy.S.array() - S0_;
    A_ = sm_.integrals;
    yd_ = y_;
    if (free_offset_) {
        A_.rowwise() -= A_.colwise().mean();
        yd_.array() -= yd_.mean();
    }
}

Vec EnsilLoss::predicted(const Vec& theta) const
{
    Vec p = sm_.integrals * theta;
    double shift = free_offset_ ? (y_ - p).mean() : 0.0;
    return p.array() + S0_ + shift;
}

LossValue EnsilLoss::operator()(const Vec& theta) const
{
    if (theta.size() != sm_.integrals.cols()) throw std::invalid_argument("theta length != column count");
    const double M = static_cast<double>(y_.size());
    LossValue L;
    Vec r = A_ * theta - yd_;
    L.data = r.squaredNorm() / M;
    L.grad = (2.0 * w_.data / M) * (A_.transpose() * r);
    if (sign_ != 0.0) {
        Vec v = sign_ * (sm_.values * theta);
        Vec relu = v.cwiseMax(0.0);
        L.thermo = relu.squaredNorm() / M;
        L.grad += (2.0 * w_.thermo * sign_ / M) * (sm_.values.transpose() * relu);
    }
    if (constraint_) {
        Vec gN = sm_.values.row(sm_.values.rows() - 1).transpose();
        double c = gN.dot(theta);
        L.constraint = c * c;
        L.grad += (2.0 * w_.constraint * c) * gN;
    }
    L.total = w_.data * L.data + w_.thermo * L.thermo + w_.constraint * L.constraint;
    return L;
}

LossValue ensil_loss(const Vec& theta, const EnsilProblem& prob) { return EnsilLoss(prob)(theta); }

static std::vector<bool> fitted_mask(const EnsilProblem& prob)
{
    const auto J = prob.terms.columns.cols();
    std::vector<bool> fit(J, true);
    for (std::size_t j = 0; j < prob.terms.structural_zero.size() && j < fit.size(); ++j)
        if (prob.terms.structural_zero[j]) fit[j] = false;
    return fit;
}

static Vec column_scales(const Mat& A)
{
    Vec s(A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        double v = A.col(j).cwiseAbs().maxCoeff();
        s[j] = v > 0 ? v : 1.0;
    }
    return s;
}

static Vec ls_solve(const EnsilLoss& loss, const std::vector<bool>& fit)
{
    const Mat& A = loss.design();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (fit[j]) idx.push_back(j);
    Mat As(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) As.col(k) = A.col(idx[k]);
    Vec s = column_scales(As);
    Mat An = As * s.cwiseInverse().asDiagonal();
    Vec phi = An.colPivHouseholderQr().solve(loss.data_target());
    Vec theta = Vec::Zero(A.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) theta[idx[k]] = phi[k] / s[k];
    return theta;
}

Vec least_squares_theta(const EnsilProblem& prob)
{
    EnsilLoss loss(prob);
    return ls_solve(loss, fitted_mask(prob));
}

FitResult fit_ensil(const EnsilProblem& prob)
{
    EnsilLoss loss(prob);
    const auto J = prob.terms.columns.cols();
    const auto fit = fitted_mask(prob);
    const SmoothedTerms& sm = loss.smoothed();
    const double M = static_cast<double>(sm.values.rows());

    Vec lb = Vec::Constant(J, -std::numeric_limits<double>::infinity());
    if (prob.lower_bounds) {
        if (prob.lower_bounds->size() != J) throw std::invalid_argument("bounds length != column count");
        lb = *prob.lower_bounds;
    }
    auto project_bounds = [&](Vec& th) {
        for (Eigen::Index j = 0; j < J; ++j) {
            if (!fit[j]) th[j] = 0.0;
            else th[j] = std::max(th[j], lb[j]);
        }
    };

    Vec theta = prob.theta_init ? *prob.theta_init : ls_solve(loss, fit);
    if (theta.size() != J) throw std::invalid_argument("theta_init length != column count");
    project_bounds(theta);

    // work in scaled coordinates so the tolerance is unit-free
    const Vec s = column_scales(sm.integrals);
    const double yscale = std::max(loss.target().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double lscale = 1.0 / (yscale * yscale);
    const double sgn = sign_of(prob.sign_mode);
    const double gtol = prob.grad_tol;

    FitResult res;
    res.legendre_order = sm.order;
    LossValue cur = loss(theta);
    long it = 0;
    bool converged = false;
    for (; it < prob.max_iterations; ++it) {
        Vec g = cur.grad.cwiseQuotient(s) * lscale;  // gradient wrt phi = theta .* s
        std::vector<bool> free_var(J);
        double gnorm = 0.0;
        for (Eigen::Index j = 0; j < J; ++j) {
            bool at_lb = theta[j] <= lb[j] + 1e-15 * std::max(1.0, std::abs(lb[j])) && g[j] > 0;
            free_var[j] = fit[j] && !at_lb;
            if (free_var[j]) gnorm += g[j] * g[j];
        }
        gnorm = std::sqrt(gnorm);
        if (gnorm < gtol) {
            converged = true;
            break;
        }
        // Gauss-Newton curvature of the three quadratic pieces, in phi coordinates
        Mat H = Mat::Zero(J, J);
        Mat An = loss.design() * s.cwiseInverse().asDiagonal();
        H += (2.0 * prob.weights.data / M) * (An.transpose() * An);
        if (sgn != 0.0) {
            Vec v = sgn * (sm.values * theta);
            Mat Gn = sm.values * s.cwiseInverse().asDiagonal();
            for (Eigen::Index i = 0; i < Gn.rows(); ++i)
                if (v[i] > 0) H += (2.0 * prob.weights.thermo / M) * Gn.row(i).transpose() * Gn.row(i);
        }
        if (prob.apply_constraint_loss) {
            Vec gN = sm.values.row(sm.values.rows() - 1).transpose().cwiseQuotient(s);
            H += 2.0 * prob.weights.constraint * gN * gN.transpose();
        }
        H *= lscale;
        std::vector<Eigen::Index> fr;
        for (Eigen::Index j = 0; j < J; ++j)
            if (free_var[j]) fr.push_back(j);
        const auto nf = static_cast<Eigen::Index>(fr.size());
        Mat Hf(nf, nf);
        Vec gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf[a] = g[fr[a]];
            for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(fr[a], fr[b]);
        }
        Hf.diagonal().array() += 1e-12 * std::max(1.0, Hf.diagonal().cwiseAbs().maxCoeff());
        Vec df = Hf.ldlt().solve(-gf);
        if (!df.allFinite() || df.dot(gf) >= 0) df = -gf;
        Vec dphi = Vec::Zero(J);
        for (Eigen::Index a = 0; a < nf; ++a) dphi[fr[a]] = df[a];

        // backtracking on the projected path
        double alpha = 1.0;
        bool moved = false, stalled = false;
        for (int ls = 0; ls < 60; ++ls) {
            Vec trial = theta + alpha * dphi.cwiseQuotient(s);
            project_bounds(trial);
            LossValue nxt = loss(trial);
            double pred = g.dot((trial - theta).cwiseProduct(s));
            if (nxt.total <= cur.total + 1e-4 * pred / lscale && nxt.total <= cur.total) {
                moved = true;
                stalled = (cur.total - nxt.total) <= 1e-15 * std::max(cur.total, 1e-300);
                theta = trial;
                cur = nxt;
                break;
            }
            alpha *= 0.5;
        }
        if (stalled) {
            converged = true;
            ++it;
            break;
        }
        if (!moved) {
            // no decrease representable: stationary to working precision
            converged = std::abs(g.dot(dphi)) <= 1e-12 * std::max(1.0, cur.total * lscale) || gnorm < 1e3 * gtol;
            break;
        }
    }
    res.theta_hat.assign(theta.data(), theta.data() + J);
    res.loss_data = cur.data;
    res.loss_thermo = cur.thermo;
    res.loss_constraint = cur.constraint;
    res.iterations = it;
    res.converged = converged;
    if (prob.theta_true) {
        res.theta_true = prob.theta_true;
        bool any = false;
        for (double v : *prob.theta_true) any = any || v != 0.0;
        if (any && prob.theta_true->size() == res.theta_hat.size()) res.mre_percent = mre(res.theta_hat, *prob.theta_true);
    }
    return res;
}

MreReport mre_report(const std::vector<double>& hat, const std::vector<double>& truth)
{
    if (hat.size() != truth.size()) throw std::invalid_argument("mre: length mismatch");
    MreReport r;
    double s = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] != 0.0) {
            s += std::abs((truth[j] - hat[j]) / truth[j]);
            ++n;
        } else {
            r.zero_abs_errors.push_back(std::abs(hat[j]));
        }
    }
    if (n == 0) throw std::invalid_argument("mre: all-zero reference vector");
    r.percent = 100.0 * s / n;
    return r;
}

double mre(const std::vector<double>& hat, const std::vector<double>& truth) { return mre_report(hat, truth).percent; }

}  // namespace ensil
