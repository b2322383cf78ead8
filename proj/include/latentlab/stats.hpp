#pragma once

#include <vector>

#include "latentlab/tensor.hpp"

namespace latentlab {

struct PcaBasis {
    Tensor mean;        // [1 x d]
    Tensor components;  // [k x d], rows orthonormal
    std::vector<double> explained;  // variance share per component, non-increasing
    bool reduced = false;           // true when k was cut to the data rank
};

/// Principal components of the rows of `data` ([n x d], n >= 2). Deterministic
/// sign convention: the largest-magnitude coordinate of each component is
/// positive. If the data rank is below k the basis is truncated and flagged.
PcaBasis pca_fit(const Tensor& data, int k);

/// Project rows into the basis: (X - mean) . components^T.
Tensor pca_project(const PcaBasis& basis, const Tensor& rows);

/// Back-project coordinates to the original space: Y . components + mean.
Tensor pca_reconstruct(const PcaBasis& basis, const Tensor& coords);

struct LogisticFit {
    Tensor w;  // [1 x d]
    double b = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// L2-regularized logistic regression by damped Newton iteration, to gradient
/// norm 1e-8 (cap 200 iterations). Labels must contain both classes.
LogisticFit fit_logistic(const Tensor& features, const std::vector<int>& labels, double l2);

double sigmoid(double x);
double logit(double p);
double logistic_predict(const LogisticFit& fit, const double* x, int d);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// P-value of the chi-square statistic of `counts` against a uniform
/// distribution over the cells.
double chi_square_uniform_pvalue(const std::vector<int>& counts);

}  // namespace latentlab
