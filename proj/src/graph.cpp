#include "latentlab/graph.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "latentlab/common.hpp"

namespace latentlab {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

namespace {

CMap cmap(const Tensor& t) { return CMap(t.v.data(), t.rows(), t.cols()); }
Map mmap(Tensor& t) { return Map(t.v.data(), t.rows(), t.cols()); }

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

const Tensor& Graph::val(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.ext ? *n.ext : n.val;
}

bool Graph::has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad_alloc; }

Tensor& Graph::grad(int id) {
    require(has_grad(id), "Graph::grad: node has no gradient");
    return nodes_[static_cast<size_t>(id)].grad;
}

Tensor& Graph::ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_alloc) {
        const Tensor& v = n.ext ? *n.ext : n.val;
        n.grad = Tensor::zeros(v.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(Tensor t) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(t);
    return push(std::move(n));
}

int Graph::param(const Tensor* t, int key) {
    Node n;
    n.op = Op::Param;
    n.ext = t;
    n.param_key = key;
    return push(std::move(n));
}

int Graph::assemble_rows(const std::vector<RowRef>& rows) {
    require(!rows.empty(), "assemble_rows: empty row list");
    const int d = val(rows[0].node).cols();
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        const Tensor& src = val(rows[i].node);
        require(src.cols() == d, "assemble_rows: width mismatch");
        require(rows[i].row >= 0 && rows[i].row < src.rows(), "assemble_rows: row out of range");
        std::copy(src.row_ptr(rows[i].row), src.row_ptr(rows[i].row) + d, out.row_ptr(static_cast<int>(i)));
    }
    Node n;
    n.op = Op::AssembleRows;
    n.val = std::move(out);
    if (track_) n.rows = rows;
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.same_shape(B), "add: shape mismatch");
    Tensor out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::add_row(int a, int row) {
    const Tensor& A = val(a);
    const Tensor& R = val(row);
    require(R.rows() == 1 && R.cols() == A.cols(), "add_row: bias must be [1 x cols]");
    Tensor out = A;
    const int T = A.rows(), d = A.cols();
    for (int i = 0; i < T; ++i) {
        double* o = out.row_ptr(i);
        for (int j = 0; j < d; ++j) o[j] += R.v[static_cast<size_t>(j)];
    }
    Node n;
    n.op = Op::AddRow;
    n.a = a;
    n.b = row;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::matmul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.cols() == B.rows(), "matmul: inner extent mismatch");
    Tensor out = Tensor::zeros({A.rows(), B.cols()});
    mmap(out).noalias() = cmap(A) * cmap(B);
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::mul_elem(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require(A.same_shape(B), "mul_elem: shape mismatch");
    Tensor out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
    Node n;
    n.op = Op::MulElem;
    n.a = a;
    n.b = b;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::scale(int a, double s) {
    Tensor out = val(a);
    for (auto& e : out.v) e *= s;
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.factor = s;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::gelu(int a) {
    Tensor out = val(a);
    for (auto& e : out.v) e = 0.5 * e * (1.0 + std::erf(e * kInvSqrt2));
    Node n;
    n.op = Op::Gelu;
    n.a = a;
    n.val = std::move(out);
    return push(std::move(n));
}

int Graph::layer_norm(int x, int gain, int bias, double eps) {
    const Tensor& X = val(x);
    const Tensor& G = val(gain);
    const Tensor& B = val(bias);
    const int T = X.rows(), d = X.cols();
    require(G.rows() == 1 && G.cols() == d && B.rows() == 1 && B.cols() == d,
            "layer_norm: gain/bias must be [1 x d]");
    Tensor out = Tensor::zeros({T, d});
    Tensor xhat = Tensor::zeros({T, d});
    Tensor inv_std = Tensor::zeros({T});
    for (int i = 0; i < T; ++i) {
        const double* xi = X.row_ptr(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xi[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std.v[static_cast<size_t>(i)] = is;
        double* xh = xhat.row_ptr(i);
        double* o = out.row_ptr(i);
        for (int j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * is;
            o[j] = G.v[static_cast<size_t>(j)] * xh[j] + B.v[static_cast<size_t>(j)];
        }
    }
    Node n;
    n.op = Op::LayerNorm;
    n.a = x;
    n.b = gain;
    n.c = bias;
    n.eps = eps;
    n.val = std::move(out);
    if (track_) {
        n.saved.push_back(std::move(xhat));
        n.saved.push_back(std::move(inv_std));
    }
    return push(std::move(n));
}

int Graph::causal_attention(int qkv, int heads) {
    const Tensor& X = val(qkv);
    const int T = X.rows();
    const int d3 = X.cols();
    require(d3 % 3 == 0, "causal_attention: qkv width must be 3d");
    const int d = d3 / 3;
    require(heads > 0 && d % heads == 0, "causal_attention: d must divide into heads");
    const int dh = d / heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor out = Tensor::zeros({T, d});
    Tensor probs = Tensor::zeros({heads, T * T});  // per head, row-major T x T
    std::vector<double> s(static_cast<size_t>(T));
    for (int h = 0; h < heads; ++h) {
        const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
        double* P = probs.row_ptr(h);
        for (int i = 0; i < T; ++i) {
            const double* qi = X.row_ptr(i) + qo;
            double mx = -1e300;
            for (int j = 0; j <= i; ++j) {
                const double* kj = X.row_ptr(j) + ko;
                double dot = 0.0;
                for (int t = 0; t < dh; ++t) dot += qi[t] * kj[t];
                dot *= scl;
                s[static_cast<size_t>(j)] = dot;
                if (dot > mx) mx = dot;
            }
            double z = 0.0;
            for (int j = 0; j <= i; ++j) {
                const double e = std::exp(s[static_cast<size_t>(j)] - mx);
                s[static_cast<size_t>(j)] = e;
                z += e;
            }
            double* pi = P + static_cast<size_t>(i) * T;
            for (int j = 0; j <= i; ++j) pi[j] = s[static_cast<size_t>(j)] / z;
            for (int j = i + 1; j < T; ++j) pi[j] = 0.0;
            double* oi = out.row_ptr(i) + qo;
            for (int t = 0; t < dh; ++t) oi[t] = 0.0;
            for (int j = 0; j <= i; ++j) {
                const double p = pi[j];
                const double* vj = X.row_ptr(j) + vo;
                for (int t = 0; t < dh; ++t) oi[t] += p * vj[t];
            }
        }
    }
    Node n;
    n.op = Op::CausalAttention;
    n.a = qkv;
    n.heads = heads;
    n.val = std::move(out);
    if (track_) n.saved.push_back(std::move(probs));
    return push(std::move(n));
}

int Graph::row_patch(int x, const std::vector<std::pair<int, std::vector<double>>>& rows) {
    Tensor out = val(x);
    const int d = out.cols();
    std::vector<RowRef> patched;
    patched.reserve(rows.size());
    for (const auto& [r, vals] : rows) {
        require(r >= 0 && r < out.rows(), "row_patch: row out of range");
        require(static_cast<int>(vals.size()) == d, "row_patch: replacement width mismatch");
        for (double e : vals) require(std::isfinite(e), "row_patch: non-finite replacement");
        std::copy(vals.begin(), vals.end(), out.row_ptr(r));
        patched.push_back({r, 0});
    }
    Node n;
    n.op = Op::RowPatch;
    n.a = x;
    n.val = std::move(out);
    if (track_) n.rows = std::move(patched);
    return push(std::move(n));
}

int Graph::cross_entropy_mean(int logits, const std::vector<int>& targets) {
    const Tensor& L = val(logits);
    const int T = L.rows(), V = L.cols();
    require(static_cast<int>(targets.size()) == T, "cross_entropy_mean: target count mismatch");
    Tensor probs = Tensor::zeros({T, V});
    double total = 0.0;
    int count = 0;
    for (int i = 0; i < T; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t < 0) continue;
        require(t < V, "cross_entropy_mean: target out of range");
        const double* li = L.row_ptr(i);
        double mx = li[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, li[j]);
        double z = 0.0;
        double* pi = probs.row_ptr(i);
        for (int j = 0; j < V; ++j) {
            pi[j] = std::exp(li[j] - mx);
            z += pi[j];
        }
        for (int j = 0; j < V; ++j) pi[j] /= z;
        total += std::log(z) + mx - li[t];
        ++count;
    }
    require(count > 0, "cross_entropy_mean: no supervised rows");
    Node n;
    n.op = Op::CrossEntropyMean;
    n.a = logits;
    n.val = Tensor({1, 1}, {total / count});
    if (track_) {
        n.targets = targets;
        n.saved.push_back(std::move(probs));
    }
    return push(std::move(n));
}

int Graph::sum_all(int a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (double e : A.v) s += e;
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.val = Tensor({1, 1}, {s});
    return push(std::move(n));
}

void Graph::backward(int loss) {
    require(track_, "backward: gradient tracking disabled");
    require(val(loss).size() == 1, "backward: loss must be scalar");
    ensure_grad(loss).v[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
        if (!nodes_[static_cast<size_t>(id)].grad_alloc) continue;
        backward_node(id);
    }
}

void Graph::backward_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::Input:
        case Op::Param:
            return;
        case Op::AssembleRows: {
            const int d = g.cols();
            for (size_t i = 0; i < n.rows.size(); ++i) {
                const RowRef& r = n.rows[i];
                Tensor& pg = ensure_grad(r.node);
                const double* src = g.row_ptr(static_cast<int>(i));
                double* dst = pg.row_ptr(r.row);
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
            return;
        }
        case Op::Add: {
            Tensor& ga = ensure_grad(n.a);
            Tensor& gb = ensure_grad(n.b);
            for (size_t i = 0; i < g.v.size(); ++i) {
                ga.v[i] += g.v[i];
                gb.v[i] += g.v[i];
            }
            return;
        }
        case Op::AddRow: {
            Tensor& ga = ensure_grad(n.a);
            Tensor& gb = ensure_grad(n.b);
            const int T = g.rows(), d = g.cols();
            for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
            for (int i = 0; i < T; ++i) {
                const double* gi = g.row_ptr(i);
                for (int j = 0; j < d; ++j) gb.v[static_cast<size_t>(j)] += gi[j];
            }
            return;
        }
        case Op::MatMul: {
            const Tensor& A = val(n.a);
            const Tensor& B = val(n.b);
            Tensor& ga = ensure_grad(n.a);
            Tensor& gb = ensure_grad(n.b);
            mmap(ga).noalias() += cmap(g) * cmap(B).transpose();
            mmap(gb).noalias() += cmap(A).transpose() * cmap(g);
            return;
        }
        case Op::MulElem: {
            const Tensor& A = val(n.a);
            const Tensor& B = val(n.b);
            Tensor& ga = ensure_grad(n.a);
            Tensor& gb = ensure_grad(n.b);
            for (size_t i = 0; i < g.v.size(); ++i) {
                ga.v[i] += g.v[i] * B.v[i];
                gb.v[i] += g.v[i] * A.v[i];
            }
            return;
        }
        case Op::Scale: {
            Tensor& ga = ensure_grad(n.a);
            for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * n.factor;
            return;
        }
        case Op::Gelu: {
            const Tensor& X = val(n.a);
            Tensor& ga = ensure_grad(n.a);
            for (size_t i = 0; i < g.v.size(); ++i) {
                const double x = X.v[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                ga.v[i] += g.v[i] * (cdf + x * pdf);
            }
            return;
        }
        case Op::LayerNorm: {
            const Tensor& xhat = n.saved[0];
            const Tensor& inv_std = n.saved[1];
            const Tensor& G = val(n.b);
            Tensor& gx = ensure_grad(n.a);
            Tensor& gg = ensure_grad(n.b);
            Tensor& gb = ensure_grad(n.c);
            const int T = g.rows(), d = g.cols();
            for (int i = 0; i < T; ++i) {
                const double* gi = g.row_ptr(i);
                const double* xh = xhat.row_ptr(i);
                double m1 = 0.0, m2 = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double dxh = gi[j] * G.v[static_cast<size_t>(j)];
                    m1 += dxh;
                    m2 += dxh * xh[j];
                    gg.v[static_cast<size_t>(j)] += gi[j] * xh[j];
                    gb.v[static_cast<size_t>(j)] += gi[j];
                }
                m1 /= d;
                m2 /= d;
                const double is = inv_std.v[static_cast<size_t>(i)];
                double* gxi = gx.row_ptr(i);
                for (int j = 0; j < d; ++j) {
                    const double dxh = gi[j] * G.v[static_cast<size_t>(j)];
                    gxi[j] += is * (dxh - m1 - xh[j] * m2);
                }
            }
            return;
        }
        case Op::CausalAttention: {
            const Tensor& X = val(n.a);
            const Tensor& probs = n.saved[0];
            Tensor& gx = ensure_grad(n.a);
            const int T = g.rows(), d = g.cols();
            const int H = n.heads, dh = d / H;
            const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
            std::vector<double> dp(static_cast<size_t>(T));
            for (int h = 0; h < H; ++h) {
                const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
                const double* P = probs.row_ptr(h);
                for (int i = 0; i < T; ++i) {
                    const double* gi = g.row_ptr(i) + qo;
                    const double* pi = P + static_cast<size_t>(i) * T;
                    // dV and dP
                    double dot_pp = 0.0;
                    for (int j = 0; j <= i; ++j) {
                        const double* vj = X.row_ptr(j) + vo;
                        double dpj = 0.0;
                        for (int t = 0; t < dh; ++t) dpj += gi[t] * vj[t];
                        dp[static_cast<size_t>(j)] = dpj;
                        dot_pp += dpj * pi[j];
                        double* gvj = gx.row_ptr(j) + vo;
                        const double p = pi[j];
                        for (int t = 0; t < dh; ++t) gvj[t] += p * gi[t];
                    }
                    // softmax backward -> dS, then dQ, dK
                    const double* qi = X.row_ptr(i) + qo;
                    double* gqi = gx.row_ptr(i) + qo;
                    for (int j = 0; j <= i; ++j) {
                        const double ds = pi[j] * (dp[static_cast<size_t>(j)] - dot_pp) * scl;
                        const double* kj = X.row_ptr(j) + ko;
                        double* gkj = gx.row_ptr(j) + ko;
                        for (int t = 0; t < dh; ++t) {
                            gqi[t] += ds * kj[t];
                            gkj[t] += ds * qi[t];
                        }
                    }
                }
            }
            return;
        }
        case Op::RowPatch: {
            Tensor& ga = ensure_grad(n.a);
            const int T = g.rows(), d = g.cols();
            std::vector<bool> patched(static_cast<size_t>(T), false);
            for (const RowRef& r : n.rows) patched[static_cast<size_t>(r.node)] = true;
            for (int i = 0; i < T; ++i) {
                if (patched[static_cast<size_t>(i)]) continue;
                const double* gi = g.row_ptr(i);
                double* gai = ga.row_ptr(i);
                for (int j = 0; j < d; ++j) gai[j] += gi[j];
            }
            return;
        }
        case Op::CrossEntropyMean: {
            const Tensor& probs = n.saved[0];
            Tensor& gl = ensure_grad(n.a);
            const int T = gl.rows(), V = gl.cols();
            int count = 0;
            for (int t : n.targets)
                if (t >= 0) ++count;
            const double go = g.v[0] / count;
            for (int i = 0; i < T; ++i) {
                const int t = n.targets[static_cast<size_t>(i)];
                if (t < 0) continue;  // masked rows get exactly zero gradient
                const double* pi = probs.row_ptr(i);
                double* gi = gl.row_ptr(i);
                for (int j = 0; j < V; ++j) gi[j] += go * pi[j];
                gi[t] -= go;
            }
            return;
        }
        case Op::SumAll: {
            Tensor& ga = ensure_grad(n.a);
            const double go = g.v[0];
            for (auto& e : ga.v) e += go;
            return;
        }
    }
}

void Graph::visit_param_grads(const std::function<void(int, const Tensor&)>& fn) const {
    for (const Node& n : nodes_) {
        if (n.op == Op::Param && n.grad_alloc) fn(n.param_key, n.grad);
    }
}

double grad_check(const std::function<int(Graph&, int)>& build, const Tensor& point, double step) {
    require(step > 0.0, "grad_check: step must be positive");
    const auto eval = [&](const Tensor& x) {
        Graph g(false);
        Tensor local = x;
        const int out = build(g, g.param(&local, 0));
        const double y = g.val(out).v[0];
        if (!std::isfinite(y)) throw NumericError("grad_check: non-finite function value");
        return y;
    };

    Graph g(true);
    Tensor local = point;
    const int leaf = g.param(&local, 0);
    const int y = build(g, leaf);
    require(g.val(y).size() == 1, "grad_check: function must be scalar-valued");
    if (!g.val(y).all_finite()) throw NumericError("grad_check: non-finite function value");
    g.backward(y);
    Tensor auto_grad = Tensor::zeros(point.shape);
    g.visit_param_grads([&](int, const Tensor& gr) { auto_grad = gr; });

    double max_rel = 0.0;
    Tensor xp = point;
    for (size_t i = 0; i < point.v.size(); ++i) {
        xp.v[i] = point.v[i] + step;
        const double fp = eval(xp);
        xp.v[i] = point.v[i] - step;
        const double fm = eval(xp);
        xp.v[i] = point.v[i];
        const double num = (fp - fm) / (2.0 * step);
        const double a = auto_grad.v[i];
        const double scale = std::max({std::abs(a), std::abs(num), 1e-6});
        max_rel = std::max(max_rel, std::abs(a - num) / scale);
    }
    return max_rel;
}

}  // namespace latentlab
