#include "latentlab/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "latentlab/common.hpp"

namespace latentlab {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

PcaBasis pca_fit(const Tensor& data, int k) {
    const int n = data.rows(), d = data.cols();
    require(n >= 2, "pca_fit: need at least two rows");
    require(k >= 1 && k <= std::min(n, d), "pca_fit: k out of range");

    PcaBasis basis;
    basis.mean = Tensor::zeros({1, d});
    for (int i = 0; i < n; ++i) {
        const double* r = data.row_ptr(i);
        for (int j = 0; j < d; ++j) basis.mean.v[static_cast<size_t>(j)] += r[j];
    }
    for (auto& e : basis.mean.v) e /= n;

    RowMat X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = data.at(i, j) - basis.mean.v[static_cast<size_t>(j)];

    Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    require(es.info() == Eigen::Success, "pca_fit: eigendecomposition failed");

    // Eigen returns ascending eigenvalues; take them from the back.
    std::vector<double> lambda(static_cast<size_t>(d));
    double total = 0.0;
    for (int j = 0; j < d; ++j) {
        lambda[static_cast<size_t>(j)] = std::max(0.0, es.eigenvalues()(d - 1 - j));
        total += lambda[static_cast<size_t>(j)];
    }
    const double tol = std::max(1e-300, lambda[0] * d * 1e-12);
    int rank = 0;
    while (rank < d && lambda[static_cast<size_t>(rank)] > tol) ++rank;
    rank = std::max(rank, 1);
    int keep = k;
    if (keep > rank) {
        keep = rank;
        basis.reduced = true;
    }

    basis.components = Tensor::zeros({keep, d});
    basis.explained.resize(static_cast<size_t>(keep));
    for (int c = 0; c < keep; ++c) {
        Eigen::VectorXd vec = es.eigenvectors().col(d - 1 - c);
        // sign convention: largest-magnitude coordinate positive
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(vec(j)) > std::abs(vec(arg))) arg = j;
        if (vec(arg) < 0) vec = -vec;
        for (int j = 0; j < d; ++j) basis.components.at(c, j) = vec(j);
        basis.explained[static_cast<size_t>(c)] = total > 0 ? lambda[static_cast<size_t>(c)] / total : 0.0;
    }
    return basis;
}

Tensor pca_project(const PcaBasis& basis, const Tensor& rows) {
    const int n = rows.rows(), d = rows.cols();
    require(d == basis.mean.cols(), "pca_project: width mismatch");
    const int k = basis.components.rows();
    Tensor out = Tensor::zeros({n, k});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            double s = 0.0;
            const double* r = rows.row_ptr(i);
            const double* comp = basis.components.row_ptr(c);
            for (int j = 0; j < d; ++j) s += (r[j] - basis.mean.v[static_cast<size_t>(j)]) * comp[j];
            out.at(i, c) = s;
        }
    }
    return out;
}

Tensor pca_reconstruct(const PcaBasis& basis, const Tensor& coords) {
    const int n = coords.rows(), k = coords.cols();
    require(k == basis.components.rows(), "pca_reconstruct: coordinate width mismatch");
    const int d = basis.mean.cols();
    Tensor out = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i) {
        double* o = out.row_ptr(i);
        for (int j = 0; j < d; ++j) o[j] = basis.mean.v[static_cast<size_t>(j)];
        for (int c = 0; c < k; ++c) {
            const double y = coords.at(i, c);
            const double* comp = basis.components.row_ptr(c);
            for (int j = 0; j < d; ++j) o[j] += y * comp[j];
        }
    }
    return out;
}

double sigmoid(double x) {
    if (x >= 0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    require(p > 0.0 && p < 1.0, "logit: p must be strictly interior");
    return std::log(p / (1.0 - p));
}

double logistic_predict(const LogisticFit& fit, const double* x, int d) {
    double s = fit.b;
    for (int j = 0; j < d; ++j) s += fit.w.v[static_cast<size_t>(j)] * x[j];
    return sigmoid(s);
}

LogisticFit fit_logistic(const Tensor& features, const std::vector<int>& labels, double l2) {
    const int n = features.rows(), d = features.cols();
    require(n >= 2 && static_cast<int>(labels.size()) == n, "fit_logistic: bad inputs");
    require(l2 >= 0.0, "fit_logistic: l2 must be non-negative");
    int pos = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, "fit_logistic: labels must be 0/1");
        pos += y;
    }
    if (pos == 0 || pos == n) throw DataError("fit_logistic: both classes must be present");

    // Newton on [w; b] with ridge on w only. Mean loss keeps the tolerance
    // scale-free in n.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd grad(d + 1);
    Eigen::MatrixXd hess(d + 1, d + 1);
    Eigen::VectorXd p(n);

    const auto loss_at = [&](const Eigen::VectorXd& th) {
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = th(d);
            const double* x = features.row_ptr(i);
            for (int j = 0; j < d; ++j) s += th(j) * x[j];
            // log(1 + exp(-y*s)) with the stable branch
            const double ys = labels[static_cast<size_t>(i)] == 1 ? s : -s;
            loss += ys >= 0 ? std::log1p(std::exp(-ys)) : -ys + std::log1p(std::exp(ys));
        }
        loss /= n;
        for (int j = 0; j < d; ++j) loss += 0.5 * l2 * th(j) * th(j);
        return loss;
    };

    LogisticFit fit;
    double prev_loss = loss_at(theta);
    for (int iter = 0; iter < 200; ++iter) {
        grad.setZero();
        hess.setZero();
        for (int i = 0; i < n; ++i) {
            double s = theta(d);
            const double* x = features.row_ptr(i);
            for (int j = 0; j < d; ++j) s += theta(j) * x[j];
            const double pi = sigmoid(s);
            p(i) = pi;
            const double r = (pi - labels[static_cast<size_t>(i)]) / n;
            const double wgt = std::max(pi * (1.0 - pi) / n, 1e-12);
            for (int j = 0; j < d; ++j) grad(j) += r * x[j];
            grad(d) += r;
            for (int j = 0; j < d; ++j) {
                for (int j2 = j; j2 < d; ++j2) hess(j, j2) += wgt * x[j] * x[j2];
                hess(j, d) += wgt * x[j];
            }
            hess(d, d) += wgt;
        }
        for (int j = 0; j < d; ++j) {
            grad(j) += l2 * theta(j);
            hess(j, j) += l2 + 1e-10;
        }
        hess(d, d) += 1e-10;
        for (int j = 0; j <= d; ++j)
            for (int j2 = 0; j2 < j; ++j2) hess(j, j2) = hess(j2, j);

        const double gnorm = grad.norm();
        fit.iterations = iter;
        if (gnorm <= 1e-8) {
            fit.converged = true;
            break;
        }
        Eigen::VectorXd delta = hess.ldlt().solve(grad);
        // damped step: halve until the loss does not increase
        double t = 1.0;
        for (int half = 0; half < 30; ++half) {
            const double cand = loss_at(theta - t * delta);
            if (cand <= prev_loss + 1e-15) {
                theta -= t * delta;
                prev_loss = cand;
                break;
            }
            t *= 0.5;
            if (half == 29) theta -= t * delta;
        }
    }

    fit.w = Tensor::zeros({1, d});
    for (int j = 0; j < d; ++j) fit.w.v[static_cast<size_t>(j)] = theta(j);
    fit.b = theta(d);
    return fit;
}

// Lentz continued fraction / series split, as in the usual references.
static double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

static double gamma_q_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1e300;
    double dd = 1.0 / b;
    double h = dd;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        dd = an * dd + b;
        if (std::abs(dd) < 1e-300) dd = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        dd = 1.0 / dd;
        const double del = dd * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gamma_q(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_q: domain error");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_uniform_pvalue(const std::vector<int>& counts) {
    require(counts.size() >= 2, "chi_square: need at least two cells");
    double n = 0.0;
    for (int c : counts) {
        require(c >= 0, "chi_square: negative count");
        n += c;
    }
    require(n > 0, "chi_square: empty sample");
    const double expected = n / static_cast<double>(counts.size());
    double stat = 0.0;
    for (int c : counts) {
        const double diff = c - expected;
        stat += diff * diff / expected;
    }
    const double dof = static_cast<double>(counts.size()) - 1.0;
    return gamma_q(dof / 2.0, stat / 2.0);
}

}  // namespace latentlab
