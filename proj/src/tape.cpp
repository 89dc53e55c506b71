#include "invseq/tape.hpp"

#include <algorithm>
#include <cmath>

#include "invseq/errors.hpp"

namespace invseq {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shapes " + a.shape_str() + " and " +
                             b.shape_str() + " differ");
    }
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
    }
    return n.grad;
}

const Tensor& Tape::grad(Var v) {
    return grad_buf(v.id);
}

void Tape::backward(Var loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
        throw DomainError("backward: invalid loss node");
    }
    if (nodes_[loss.id].value.size() != 1) {
        throw DomainError("backward: loss must be scalar, got shape " +
                          nodes_[loss.id].value.shape_str());
    }
    grad_buf(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.has_grad || !n.backprop || !n.requires_grad) continue;
        n.backprop(*this, id);
    }
}

void Tape::clear() { nodes_.clear(); }

// ---- op implementations ----------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
        throw DimensionError("matmul: incompatible shapes " + A.shape_str() + " and " +
                             B.shape_str());
    }
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = A.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * B.at(p, j);
        }
    }
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi, m, k, n](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& A = tp.val(ai);
                      const Tensor& B = tp.val(bi);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);  // g * B^T
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) {
                                  double gv = g.at(i, j);
                                  if (gv == 0.0) continue;
                                  for (std::size_t p = 0; p < k; ++p)
                                      ga.at(i, p) += gv * B.at(p, j);
                              }
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);  // A^T * g
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                  double av = A.at(i, p);
                                  if (av == 0.0) continue;
                                  for (std::size_t j = 0; j < n; ++j)
                                      gb.at(p, j) += av * g.at(i, j);
                              }
                      }
                  });
}

Var matvec(Tape& t, Var a, Var x) {
    const Tensor& A = t.val(a);
    const Tensor& X = t.val(x);
    if (A.rank() != 2 || X.rank() != 1 || A.cols() != X.size()) {
        throw DimensionError("matvec: incompatible shapes " + A.shape_str() + " and " +
                             X.shape_str());
    }
    std::size_t m = A.rows(), n = A.cols();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += A.at(i, j) * X[j];
        out[i] = s;
    }
    int ai = a.id, xi = x.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(xi),
                  [ai, xi, m, n](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& A = tp.val(ai);
                      const Tensor& X = tp.val(xi);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += g[i] * X[j];
                      }
                      if (tp.wants_grad(xi)) {
                          Tensor& gx = tp.grad_buf(xi);
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gx[j] += A.at(i, j) * g[i];
                      }
                  });
}

Var vecmat(Tape& t, Var x, Var a) {
    const Tensor& X = t.val(x);
    const Tensor& A = t.val(a);
    if (X.rank() != 1 || A.rank() != 2 || X.size() != A.rows()) {
        throw DimensionError("vecmat: incompatible shapes " + X.shape_str() + " and " +
                             A.shape_str());
    }
    std::size_t m = A.rows(), n = A.cols();
    Tensor out({n});
    for (std::size_t i = 0; i < m; ++i) {
        double xv = X[i];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out[j] += xv * A.at(i, j);
    }
    int xi = x.id, ai = a.id;
    return t.push(std::move(out), t.wants_grad(xi) || t.wants_grad(ai),
                  [xi, ai, m, n](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& X = tp.val(xi);
                      const Tensor& A = tp.val(ai);
                      if (tp.wants_grad(xi)) {
                          Tensor& gx = tp.grad_buf(xi);
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gx[i] += A.at(i, j) * g[j];
                      }
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < m; ++i) {
                              double xv = X[i];
                              if (xv == 0.0) continue;
                              for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += xv * g[j];
                          }
                      }
                  });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_same_shape(A, B, "add");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                      }
                  });
}

Var sub(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_same_shape(A, B, "sub");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                      }
                  });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_same_shape(A, B, "mul");
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& A = tp.val(ai);
                      const Tensor& B = tp.val(bi);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
                      }
                  });
}

Var scale(Tape& t, Var a, double c) {
    const Tensor& A = t.val(a);
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * c;
    int ai = a.id;
    return t.push(std::move(out), t.wants_grad(ai), [ai, c](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        if (tp.wants_grad(ai)) {
            Tensor& ga = tp.grad_buf(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        }
    });
}

Var add_row_broadcast(Tape& t, Var m, Var v) {
    const Tensor& M = t.val(m);
    const Tensor& V = t.val(v);
    if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.size()) {
        throw DimensionError("add_row_broadcast: incompatible shapes " + M.shape_str() +
                             " and " + V.shape_str());
    }
    Tensor out(M.shape());
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c) out.at(r, c) = M.at(r, c) + V[c];
    int mi = m.id, vi = v.id;
    return t.push(std::move(out), t.wants_grad(mi) || t.wants_grad(vi),
                  [mi, vi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(mi)) {
                          Tensor& gm = tp.grad_buf(mi);
                          for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                      }
                      if (tp.wants_grad(vi)) {
                          Tensor& gv = tp.grad_buf(vi);
                          for (std::size_t r = 0; r < g.rows(); ++r)
                              for (std::size_t c = 0; c < g.cols(); ++c) gv[c] += g.at(r, c);
                      }
                  });
}

Var add_col_broadcast(Tape& t, Var m, Var v) {
    const Tensor& M = t.val(m);
    const Tensor& V = t.val(v);
    if (M.rank() != 2 || V.rank() != 1 || M.rows() != V.size()) {
        throw DimensionError("add_col_broadcast: incompatible shapes " + M.shape_str() +
                             " and " + V.shape_str());
    }
    Tensor out(M.shape());
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c) out.at(r, c) = M.at(r, c) + V[r];
    int mi = m.id, vi = v.id;
    return t.push(std::move(out), t.wants_grad(mi) || t.wants_grad(vi),
                  [mi, vi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(mi)) {
                          Tensor& gm = tp.grad_buf(mi);
                          for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                      }
                      if (tp.wants_grad(vi)) {
                          Tensor& gv = tp.grad_buf(vi);
                          for (std::size_t r = 0; r < g.rows(); ++r)
                              for (std::size_t c = 0; c < g.cols(); ++c) gv[r] += g.at(r, c);
                      }
                  });
}

Var tanh_op(Tape& t, Var a) {
    const Tensor& A = t.val(a);
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A[i]);
    int ai = a.id;
    return t.push(std::move(out), t.wants_grad(ai), [ai](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (tp.wants_grad(ai)) {
            Tensor& ga = tp.grad_buf(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        }
    });
}

Var sigmoid(Tape& t, Var a) {
    const Tensor& A = t.val(a);
    Tensor out(A.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-A[i]));
    int ai = a.id;
    return t.push(std::move(out), t.wants_grad(ai), [ai](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (tp.wants_grad(ai)) {
            Tensor& ga = tp.grad_buf(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        }
    });
}

namespace {

void softmax_fill(const double* in, double* out, std::size_t n) {
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

}  // namespace

Var softmax(Tape& t, Var v) {
    const Tensor& V = t.val(v);
    if (V.rank() != 1 || V.size() == 0) {
        throw DomainError("softmax: requires a non-empty vector, got " + V.shape_str());
    }
    Tensor out(V.shape());
    softmax_fill(V.data(), out.data(), V.size());
    int vi = v.id;
    return t.push(std::move(out), t.wants_grad(vi), [vi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (!tp.wants_grad(vi)) return;
        Tensor& gv = tp.grad_buf(vi);
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
        for (std::size_t i = 0; i < g.size(); ++i) gv[i] += y[i] * (g[i] - dot);
    });
}

Var softmax_rows(Tape& t, Var m) {
    const Tensor& M = t.val(m);
    if (M.rank() != 2 || M.cols() == 0) {
        throw DomainError("softmax_rows: requires a non-empty matrix, got " + M.shape_str());
    }
    Tensor out(M.shape());
    for (std::size_t r = 0; r < M.rows(); ++r)
        softmax_fill(M.data() + r * M.cols(), out.data() + r * M.cols(), M.cols());
    int mi = m.id;
    return t.push(std::move(out), t.wants_grad(mi), [mi](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& y = tp.val(self);
        if (!tp.wants_grad(mi)) return;
        Tensor& gm = tp.grad_buf(mi);
        for (std::size_t r = 0; r < g.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < g.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
            for (std::size_t c = 0; c < g.cols(); ++c)
                gm.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
    });
}

namespace {

void validate_probability_row(const double* p, std::size_t n, const char* op) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] < 0.0) {
            throw DomainError(std::string(op) + ": negative probability entry");
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw DomainError(std::string(op) + ": input not normalized (sum = " +
                          std::to_string(sum) + ")");
    }
}

}  // namespace

Var cross_entropy(Tape& t, Var p, std::size_t target) {
    const Tensor& P = t.val(p);
    if (P.rank() != 1 || target >= P.size()) {
        throw DimensionError("cross_entropy: target " + std::to_string(target) +
                             " out of range for " + P.shape_str());
    }
    validate_probability_row(P.data(), P.size(), "cross_entropy");
    double pt = std::max(P[target], kProbFloor);
    Tensor out({1}, {-std::log(pt)});
    int pi = p.id;
    return t.push(std::move(out), t.wants_grad(pi), [pi, target](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& P = tp.val(pi);
        if (!tp.wants_grad(pi)) return;
        if (P[target] <= kProbFloor) return;  // clamped region, zero slope
        tp.grad_buf(pi)[target] += -g[0] / P[target];
    });
}

Var cross_entropy_rows_mean(Tape& t, Var p, const std::vector<std::size_t>& targets) {
    const Tensor& P = t.val(p);
    if (P.rank() != 2 || targets.size() != P.rows()) {
        throw DimensionError("cross_entropy_rows_mean: " + std::to_string(targets.size()) +
                             " targets for matrix " + P.shape_str());
    }
    std::size_t n = P.cols();
    double total = 0.0;
    for (std::size_t r = 0; r < P.rows(); ++r) {
        if (targets[r] >= n) {
            throw DimensionError("cross_entropy_rows_mean: target out of range in row " +
                                 std::to_string(r));
        }
        validate_probability_row(P.data() + r * n, n, "cross_entropy_rows_mean");
        total += -std::log(std::max(P.at(r, targets[r]), kProbFloor));
    }
    Tensor out({1}, {total / static_cast<double>(P.rows())});
    int pi = p.id;
    auto tgt = targets;
    return t.push(std::move(out), t.wants_grad(pi), [pi, tgt](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        const Tensor& P = tp.val(pi);
        if (!tp.wants_grad(pi)) return;
        Tensor& gp = tp.grad_buf(pi);
        double inv_m = 1.0 / static_cast<double>(P.rows());
        for (std::size_t r = 0; r < P.rows(); ++r) {
            double pv = P.at(r, tgt[r]);
            if (pv <= kProbFloor) continue;
            gp.at(r, tgt[r]) += -g[0] * inv_m / pv;
        }
    });
}

Var mse(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_same_shape(A, B, "mse");
    double total = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        double d = A[i] - B[i];
        total += d * d;
    }
    Tensor out({1}, {total / static_cast<double>(A.size())});
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      const Tensor& A = tp.val(ai);
                      const Tensor& B = tp.val(bi);
                      double c = 2.0 * g[0] / static_cast<double>(A.size());
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < A.size(); ++i)
                              ga[i] += c * (A[i] - B[i]);
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t i = 0; i < A.size(); ++i)
                              gb[i] -= c * (A[i] - B[i]);
                      }
                  });
}

Var concat(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.rank() != 1 || B.rank() != 1) {
        throw DimensionError("concat: rank-1 tensors required, got " + A.shape_str() +
                             " and " + B.shape_str());
    }
    Tensor out({A.size() + B.size()});
    for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i];
    for (std::size_t i = 0; i < B.size(); ++i) out[A.size() + i] = B[i];
    int ai = a.id, bi = b.id;
    std::size_t na = A.size();
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi, na](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t i = 0; i < g.size() - na; ++i) gb[i] += g[na + i];
                      }
                  });
}

Var concat_cols(Tape& t, Var a, Var b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.rows() != B.rows()) {
        throw DimensionError("concat_cols: incompatible shapes " + A.shape_str() + " and " +
                             B.shape_str());
    }
    std::size_t m = A.rows(), p = A.cols(), q = B.cols();
    Tensor out({m, p + q});
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < p; ++c) out.at(r, c) = A.at(r, c);
        for (std::size_t c = 0; c < q; ++c) out.at(r, p + c) = B.at(r, c);
    }
    int ai = a.id, bi = b.id;
    return t.push(std::move(out), t.wants_grad(ai) || t.wants_grad(bi),
                  [ai, bi, m, p, q](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (tp.wants_grad(ai)) {
                          Tensor& ga = tp.grad_buf(ai);
                          for (std::size_t r = 0; r < m; ++r)
                              for (std::size_t c = 0; c < p; ++c) ga.at(r, c) += g.at(r, c);
                      }
                      if (tp.wants_grad(bi)) {
                          Tensor& gb = tp.grad_buf(bi);
                          for (std::size_t r = 0; r < m; ++r)
                              for (std::size_t c = 0; c < q; ++c)
                                  gb.at(r, c) += g.at(r, p + c);
                      }
                  });
}

Var stack_cols(Tape& t, const std::vector<Var>& columns) {
    if (columns.empty()) throw DimensionError("stack_cols: no columns given");
    std::size_t d = t.val(columns[0]).size();
    std::size_t k = columns.size();
    Tensor out({d, k});
    bool wants = false;
    for (std::size_t c = 0; c < k; ++c) {
        const Tensor& col = t.val(columns[c]);
        if (col.rank() != 1 || col.size() != d) {
            throw DimensionError("stack_cols: column " + std::to_string(c) + " has shape " +
                                 col.shape_str() + ", expected [" + std::to_string(d) + "]");
        }
        for (std::size_t r = 0; r < d; ++r) out.at(r, c) = col[r];
        wants = wants || t.wants_grad(columns[c].id);
    }
    std::vector<int> ids(k);
    for (std::size_t c = 0; c < k; ++c) ids[c] = columns[c].id;
    return t.push(std::move(out), wants, [ids, d](Tape& tp, int self) {
        const Tensor& g = tp.grad_buf(self);
        for (std::size_t c = 0; c < ids.size(); ++c) {
            if (!tp.wants_grad(ids[c])) continue;
            Tensor& gc = tp.grad_buf(ids[c]);
            for (std::size_t r = 0; r < d; ++r) gc[r] += g.at(r, c);
        }
    });
}

Var dropout(Tape& t, Var a, double rate, std::mt19937_64& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    const Tensor& A = t.val(a);
    if (!training || rate == 0.0) {
        // identity at evaluation, no rescaling
        int ai = a.id;
        Tensor out = A;
        return t.push(std::move(out), t.wants_grad(ai), [ai](Tape& tp, int self) {
            const Tensor& g = tp.grad_buf(self);
            if (!tp.wants_grad(ai)) return;
            Tensor& ga = tp.grad_buf(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    std::vector<char> mask(A.size());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
        mask[i] = dist(rng) >= rate ? 1 : 0;
        out[i] = mask[i] ? A[i] : 0.0;
    }
    int ai = a.id;
    return t.push(std::move(out), t.wants_grad(ai),
                  [ai, mask = std::move(mask)](Tape& tp, int self) {
                      const Tensor& g = tp.grad_buf(self);
                      if (!tp.wants_grad(ai)) return;
                      Tensor& ga = tp.grad_buf(ai);
                      for (std::size_t i = 0; i < g.size(); ++i)
                          if (mask[i]) ga[i] += g[i];
                  });
}

}  // namespace invseq
