#include "ensil/learn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ensil {

namespace {

constexpr int kMoments = 7;  // <x^0> .. <x^6>

// Everything the free-energy balance needs, from one bandwidth choice.
struct BalanceData {
    Vec dS;      // S_i - S_0
    Mat mom;     // raw moments per sample
    Mat imom;    // time integrals of the smoothed moments
    Vec fisher;  // int p_x^2 / p
    Vec ifisher;
    EnsilProblem stage1;
};

BalanceData prepare(const ParticleEnsemble& pe, const std::vector<std::size_t>& idx, const Grid1D& grid,
                    const FpeOptions& opt, double factor)
{
    BalanceData bd;
    std::vector<DensityCurve> dens;
    std::vector<double> times;
    for (auto k : idx) {
        double h = factor * silverman_bandwidth(pe.samples[k]);
        dens.push_back(kde(pe.samples[k], grid, h));
        times.push_back(pe.times[k]);
    }
    const auto M = static_cast<Eigen::Index>(idx.size());
    EntropyTrace tr;
    tr.kind = EntropyKind::shannon;
    tr.times = times;
    tr.S.resize(M);
    for (Eigen::Index i = 0; i < M; ++i) tr.S[i] = shannon_entropy(dens[i]);
    TermMatrix tm = fpe_entropy_balance_terms(dens, times);

    bd.dS = tr.S.array() - tr.S[0];
    bd.fisher = tm.columns.col(3);
    bd.mom.resize(M, kMoments);
    for (Eigen::Index i = 0; i < M; ++i) {
        auto m = density_moments(dens[i], kMoments - 1);
        for (int q = 0; q < kMoments; ++q) bd.mom(i, q) = m[q];
    }
    TermMatrix series;
    series.times = times;
    series.columns.resize(M, kMoments + 1);
    series.columns.leftCols(kMoments) = bd.mom;
    series.columns.col(kMoments) = bd.fisher;
    SmoothedTerms sm = smooth_and_integrate(series, opt.legendre_order);
    bd.imom = sm.integrals.leftCols(kMoments);
    bd.ifisher = sm.integrals.col(kMoments);

    bd.stage1.entropy = tr;
    bd.stage1.terms = tm;
    bd.stage1.sign_mode = SignMode::production;
    bd.stage1.weights = opt.weights;
    bd.stage1.legendre_order = opt.legendre_order;
    bd.stage1.theta_true = opt.theta_true;
    return bd;
}

// p = (theta3, theta1, theta0, D); drift powers 3, 1, 0
const int kPow[3] = {3, 1, 0};

// residuals of the integrated free-energy balance plus the dissipation-sign penalty, with Jacobian
void balance_residuals(const BalanceData& bd, const Eigen::Vector4d& p, double w_thermo, Vec& R, Mat& Jac,
                       double* loss_data = nullptr, double* loss_thermo = nullptr)
{
    const auto M = bd.dS.size();
    const double th[3] = {p[0], p[1], p[2]};
    const double D = p[3];
    const double sM = 1.0 / std::sqrt(static_cast<double>(M));
    const double sw = std::sqrt(w_thermo) * sM;
    R.resize(2 * M);
    Jac.setZero(2 * M, 4);
    double ld = 0.0, lt = 0.0;
    for (Eigen::Index i = 0; i < M; ++i) {
        // u^2 moments and their parameter derivatives
        auto u2 = [&](const Mat& mm, double& val, double dth[3]) {
            val = 0.0;
            for (int a = 0; a < 3; ++a) {
                dth[a] = 0.0;
                for (int b = 0; b < 3; ++b) {
                    val += th[a] * th[b] * mm(i, kPow[a] + kPow[b]);
                    dth[a] += 2.0 * th[b] * mm(i, kPow[a] + kPow[b]);
                }
            }
        };
        double IU2, dIU2[3], U2, dU2[3];
        u2(bd.imom, IU2, dIU2);
        u2(bd.mom, U2, dU2);

        const double dM4 = bd.mom(i, 4) - bd.mom(0, 4);
        const double dM2 = bd.mom(i, 2) - bd.mom(0, 2);
        const double dM1 = bd.mom(i, 1) - bd.mom(0, 1);
        const double dV = -(th[0] / 4.0) * dM4 - (th[1] / 2.0) * dM2 - th[2] * dM1;
        const double IUp = 3.0 * th[0] * bd.imom(i, 2) + th[1] * bd.imom(i, 0);
        const double res = bd.dS[i] - dV / D - 2.0 * IUp - D * bd.ifisher[i] - IU2 / D;
        R[i] = sM * res;
        Jac(i, 0) = sM * (dM4 / (4.0 * D) - 6.0 * bd.imom(i, 2) - dIU2[0] / D);
        Jac(i, 1) = sM * (dM2 / (2.0 * D) - 2.0 * bd.imom(i, 0) - dIU2[1] / D);
        Jac(i, 2) = sM * (dM1 / D - dIU2[2] / D);
        Jac(i, 3) = sM * (dV / (D * D) - bd.ifisher[i] + IU2 / (D * D));
        ld += res * res;

        const double Up = 3.0 * th[0] * bd.mom(i, 2) + th[1] * bd.mom(i, 0);
        const double dF = -2.0 * Up - D * bd.fisher[i] - U2 / D;
        if (dF > 0 && w_thermo > 0) {
            R[M + i] = sw * dF;
            Jac(M + i, 0) = sw * (-6.0 * bd.mom(i, 2) - dU2[0] / D);
            Jac(M + i, 1) = sw * (-2.0 * bd.mom(i, 0) - dU2[1] / D);
            Jac(M + i, 2) = sw * (-dU2[2] / D);
            Jac(M + i, 3) = sw * (-bd.fisher[i] + U2 / (D * D));
            lt += dF * dF;
        } else {
            R[M + i] = 0.0;
        }
    }
    if (loss_data) *loss_data = ld / M;
    if (loss_thermo) *loss_thermo = lt / M;
}

struct Stage2 {
    Eigen::Vector4d p;
    long iterations = 0;
    bool converged = false;
};

// Damped Newton with projection onto theta3 < 0, D > 0. The theta0 direction is nearly flat in J^T J
// and curved through the residuals themselves, so the Hessian keeps the second-order residual part.
Stage2 minimize_balance(const BalanceData& bd, Eigen::Vector4d p, double w_thermo)
{
    auto project = [](Eigen::Vector4d& q) {
        q[0] = std::min(q[0], -1e-9);
        q[3] = std::max(q[3], 1e-9);
    };
    auto evaluate = [&](const Eigen::Vector4d& q, double& cost, Eigen::Vector4d& g, Eigen::Matrix4d& jtj) {
        Vec R;
        Mat J;
        balance_residuals(bd, q, w_thermo, R, J);
        cost = R.squaredNorm();
        g = J.transpose() * R;
        jtj = J.transpose() * J;
    };
    auto hessian = [&](const Eigen::Vector4d& q, const Eigen::Vector4d& g, const Eigen::Matrix4d& jtj) {
        Eigen::Matrix4d H;
        for (int c = 0; c < 4; ++c) {
            Eigen::Vector4d qc = q;
            const double h = 1e-6 * std::max(std::abs(q[c]), 1e-3);
            qc[c] += h;
            double cc;
            Eigen::Vector4d gc;
            Eigen::Matrix4d unused;
            evaluate(qc, cc, gc, unused);
            H.col(c) = (gc - g) / h;
        }
        H = 0.5 * (H + H.transpose()).eval();
        return std::isfinite(H.sum()) ? H : jtj;
    };
    project(p);
    double cost;
    Eigen::Vector4d g;
    Eigen::Matrix4d jtj;
    evaluate(p, cost, g, jtj);
    double lambda = 1e-3;
    Stage2 out;
    for (long it = 0; it < 2000; ++it) {
        out.iterations = it + 1;
        if (g.norm() <= 1e-14 * std::max(1.0, jtj.diagonal().maxCoeff())) {
            out.converged = true;
            break;
        }
        const Eigen::Matrix4d H = hessian(p, g, jtj);
        const Eigen::Vector4d scale = jtj.diagonal().cwiseMax(1e-30);
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            Eigen::Matrix4d A = H;
            A.diagonal() += lambda * scale;
            Eigen::LLT<Eigen::Matrix4d> llt(A);
            if (llt.info() != Eigen::Success) {
                lambda = std::max(lambda * 4.0, 1e-8);
                continue;
            }
            Eigen::Vector4d q = p + llt.solve(-g);
            project(q);
            double cq;
            Eigen::Vector4d gq;
            Eigen::Matrix4d jq;
            evaluate(q, cq, gq, jq);
            if (std::isfinite(cq) && cq < cost) {
                double rel = (cost - cq) / std::max(cost, 1e-300);
                double dp = (q - p).norm() / std::max(1e-12, p.norm());
                p = q;
                cost = cq;
                g = gq;
                jtj = jq;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < 1e-14 || dp < 1e-13) out.converged = true;
            } else {
                lambda = std::max(lambda * 4.0, 1e-8);
            }
        }
        if (!accepted) {
            // no representable decrease left
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }
    out.p = p;
    return out;
}

}  // namespace

FpeFit fit_fpe(const ParticleEnsemble& pe, const FpeOptions& opt)
{
    if (pe.times.size() < 2) throw std::invalid_argument("FPE fit needs at least two snapshots");
    if (pe.particles() < 1000) throw std::invalid_argument("FPE fit needs at least 1000 particles");
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < pe.times.size(); ++k)
        if (pe.times[k] >= opt.t_start - 1e-9) idx.push_back(k);
    if (idx.size() < 3) throw std::invalid_argument("FPE fit window holds fewer than three snapshots");
    std::vector<std::vector<double>> window;
    for (auto k : idx) window.push_back(pe.samples[k]);
    const Grid1D grid = fpe_grid(window, opt.grid_points, opt.pad);

    FpeFit out;
    BalanceData primary = prepare(pe, idx, grid, opt, opt.bandwidth_factor);
    out.stage1 = fit_ensil(primary.stage1);
    out.entropy = primary.stage1.entropy;
    out.terms = primary.stage1.terms;
    if (!opt.stage2) {
        out.result = out.stage1;
        return out;
    }
    const auto& s1 = out.stage1.theta_hat;
    Eigen::Vector4d init(s1[0] < 0 ? s1[0] : -1e-3, s1[1], 0.0, s1[3] > 0 ? s1[3] : 0.1);

    std::vector<double> factors = {opt.bandwidth_factor};
    if (opt.extrapolate) factors.push_back(opt.bandwidth_factor * opt.extrapolate_ratio);
    std::vector<Stage2> fits;
    for (std::size_t f = 0; f < factors.size(); ++f) {
        const BalanceData& bd = f == 0 ? primary : prepare(pe, idx, grid, opt, factors[f]);
        fits.push_back(minimize_balance(bd, f == 0 ? init : fits[0].p, opt.weights.thermo));
        out.per_bandwidth.push_back({fits.back().p[0], fits.back().p[1], fits.back().p[2], fits.back().p[3]});
    }
    Eigen::Vector4d p = fits[0].p;
    if (opt.extrapolate) {
        // smoothing bias grows like h^2: eliminate it from the pair of estimates
        const double r = opt.extrapolate_ratio * opt.extrapolate_ratio;
        p = (r * fits[0].p - fits[1].p) / (r - 1.0);
    }

    FitResult& res = out.result;
    res.theta_hat = {p[0], p[1], p[2], p[3]};
    res.legendre_order = effective_order(opt.legendre_order, idx.size());
    res.converged = true;
    for (auto& f : fits) {
        res.iterations += f.iterations;
        res.converged = res.converged && f.converged;
    }
    Vec R;
    Mat J;
    if (p[0] < 0 && p[3] > 0) balance_residuals(primary, p, opt.weights.thermo, R, J, &res.loss_data, &res.loss_thermo);
    else res.converged = false;
    if (opt.theta_true) {
        res.theta_true = opt.theta_true;
        res.mre_percent = mre(res.theta_hat, *opt.theta_true);
    }
    return out;
}

FitResult fit_pme(const FieldSeries& fs, double m, const PmeFitOptions& opt)
{
    if (fs.fields.size() < 3) throw std::invalid_argument("PME fit needs at least three snapshots");
    EnsilProblem prob;
    prob.entropy = pme_entropy_trace(fs, m, opt.filter_frac);
    prob.terms = pme_terms(fs, m, opt.filter_frac);
    prob.sign_mode = SignMode::dissipative;
    prob.weights = opt.weights;
    prob.legendre_order = opt.legendre_order;
    prob.theta_true = opt.theta_true;
    return fit_ensil(prob);
}

}  // namespace ensil
