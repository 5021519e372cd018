#include "ensil/learn.hpp"

#include <cmath>
#include <stdexcept>

namespace ensil {

static void monomials(int n_species, int degree, std::vector<int>& cur, int pos, int left,
                      std::vector<std::vector<int>>& out)
{
    if (pos == n_species) {
        out.push_back(cur);
        return;
    }
    for (int e = 0; e <= left; ++e) {
        cur[pos] = e;
        monomials(n_species, degree, cur, pos + 1, left - e, out);
    }
    cur[pos] = 0;
}

static std::vector<std::vector<int>> library(int n_species, int degree)
{
    std::vector<std::vector<int>> all, out;
    std::vector<int> cur(n_species, 0);
    monomials(n_species, degree, cur, 0, degree, all);
    // order by total degree, then as generated
    for (int d = 0; d <= degree; ++d)
        for (auto& e : all) {
            int s = 0;
            for (int v : e) s += v;
            if (s == d) out.push_back(e);
        }
    return out;
}

double SindyModel::coeff(int equation_col, const std::vector<int>& exps) const
{
    for (std::size_t k = 0; k < exponents.size(); ++k)
        if (exponents[k] == exps) return coeffs(static_cast<Eigen::Index>(k), equation_col);
    throw std::invalid_argument("monomial not in library");
}

SindyModel fit_integral_sindy(const TimeSeries& ts, const LibrarySpec& spec, const std::vector<int>& equations,
                              std::vector<int> library_species)
{
    if (spec.threshold < 0) throw std::invalid_argument("threshold must be >= 0");
    if (!ts.uniform) throw std::invalid_argument("integral SINDy needs uniform sampling");
    const auto M = static_cast<Eigen::Index>(ts.times.size());
    const int ns = static_cast<int>(ts.values.cols());
    if (M < 3) throw std::invalid_argument("integral SINDy needs at least three samples");
    if (library_species.empty())
        for (int j = 0; j < ns; ++j) library_species.push_back(j);
    for (int j : library_species)
        if (j < 0 || j >= ns) throw std::invalid_argument("library species index out of range");
    const int nl = static_cast<int>(library_species.size());

    SindyModel model;
    model.exponents = library(nl, spec.degree);
    model.equations = equations;
    const auto L = static_cast<Eigen::Index>(model.exponents.size());
    for (auto& e : model.exponents) {
        std::string lab;
        for (int j = 0; j < nl; ++j)
            for (int q = 0; q < e[j]; ++q) lab += (lab.empty() ? "" : "*") + ts.species_names[library_species[j]];
        model.labels.push_back(lab.empty() ? "1" : lab);
    }

    // cumulative trapezoid of every monomial
    Mat Theta(M, L);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index k = 0; k < L; ++k) {
            double v = 1.0;
            for (int j = 0; j < nl; ++j) v *= std::pow(ts.values(i, library_species[j]), model.exponents[k][j]);
            Theta(i, k) = v;
        }
    Mat A = Mat::Zero(M, L);
    for (Eigen::Index i = 1; i < M; ++i)
        A.row(i) = A.row(i - 1) + 0.5 * (ts.times[i] - ts.times[i - 1]) * (Theta.row(i) + Theta.row(i - 1));
    Vec scale(L);
    for (Eigen::Index k = 0; k < L; ++k) {
        double s = A.col(k).norm();
        scale[k] = s > 0 ? s : 1.0;
    }
    Mat An = A * scale.cwiseInverse().asDiagonal();

    model.coeffs = Mat::Zero(L, static_cast<Eigen::Index>(equations.size()));
    bool all_zero = true;
    for (std::size_t e = 0; e < equations.size(); ++e) {
        int sp = equations[e];
        if (sp < 0 || sp >= ns) throw std::invalid_argument("equation index out of range");
        Vec b = ts.values.col(sp).array() - ts.values(0, sp);
        std::vector<bool> support(L, true);
        Vec xi = Vec::Zero(L);
        for (int round = 0; round < spec.max_rounds; ++round) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index k = 0; k < L; ++k)
                if (support[k]) idx.push_back(k);
            xi.setZero();
            if (idx.empty()) break;
            Mat As(M, static_cast<Eigen::Index>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) As.col(k) = An.col(idx[k]);
            Vec z;
            if (spec.ridge > 0) {
                // ridge as extra rows keeps the solve in QR form
                const auto q = static_cast<Eigen::Index>(idx.size());
                Mat Aug(M + q, q);
                Aug << As, std::sqrt(spec.ridge) * Mat::Identity(q, q);
                Vec rhs = Vec::Zero(M + q);
                rhs.head(M) = b;
                z = Aug.colPivHouseholderQr().solve(rhs);
            } else {
                z = As.colPivHouseholderQr().solve(b);
            }
            if (!z.allFinite()) throw std::runtime_error("singular SINDy library after thresholding");
            for (std::size_t k = 0; k < idx.size(); ++k) xi[idx[k]] = z[k] / scale[idx[k]];
            bool changed = false;
            for (Eigen::Index k = 0; k < L; ++k)
                if (support[k] && std::abs(xi[k]) < spec.threshold) {
                    support[k] = false;
                    xi[k] = 0.0;
                    changed = true;
                }
            if (!changed) break;
        }
        model.coeffs.col(static_cast<Eigen::Index>(e)) = xi;
        if (xi.cwiseAbs().maxCoeff() > 0) all_zero = false;
    }
    model.degenerate = all_zero;
    return model;
}

}  // namespace ensil
