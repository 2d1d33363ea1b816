#include "ibs/linear_operator.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ibs/errors.hpp"
#include "ibs/transform.hpp"

namespace ibs {

namespace {

void require_length(std::size_t got, std::size_t want, const char* where) {
  if (got != want) {
    std::ostringstream msg;
    msg << where << ": expected length " << want << ", got " << got;
    throw SizeError(msg.str());
  }
}

class IdentityNode final : public OperatorNode {
 public:
  explicit IdentityNode(std::size_t n) : n_(n) {}
  std::size_t rows() const override { return n_; }
  std::size_t cols() const override { return n_; }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    std::copy(in.begin(), in.end(), out.begin());
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    std::copy(in.begin(), in.end(), out.begin());
  }
  std::string describe() const override { return "I(" + std::to_string(n_) + ")"; }

 private:
  std::size_t n_;
};

enum class KernelKind { Fft, Ifft, Fwht };

class KernelNode final : public OperatorNode {
 public:
  KernelNode(std::size_t n, KernelKind kind) : n_(n), kind_(kind) {
    if (!is_power_of_two(n)) throw SizeError("transform kernel size must be a power of two");
  }
  std::size_t rows() const override { return n_; }
  std::size_t cols() const override { return n_; }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    std::copy(in.begin(), in.end(), out.begin());
    run(out, false);
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    std::copy(in.begin(), in.end(), out.begin());
    run(out, true);
  }
  std::string describe() const override {
    static const char* names[] = {"F", "F^H", "H"};
    return std::string(names[static_cast<int>(kind_)]) + "(" + std::to_string(n_) + ")";
  }

 private:
  void run(std::span<cplx> v, bool adjoint) const {
    switch (kind_) {
      case KernelKind::Fft:
        adjoint ? ifft_inplace(v) : fft_inplace(v);
        break;
      case KernelKind::Ifft:
        adjoint ? fft_inplace(v) : ifft_inplace(v);
        break;
      case KernelKind::Fwht:
        fwht_inplace(v);
        break;
    }
  }
  std::size_t n_;
  KernelKind kind_;
};

class PermutationNode final : public OperatorNode {
 public:
  explicit PermutationNode(Permutation perm) : perm_(std::move(perm)) {}
  std::size_t rows() const override { return perm_.size(); }
  std::size_t cols() const override { return perm_.size(); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
  }
  std::string describe() const override { return "P(" + std::to_string(perm_.size()) + ")"; }

 private:
  Permutation perm_;
};

class DiagonalNode final : public OperatorNode {
 public:
  explicit DiagonalNode(CVec d) : d_(std::move(d)) {}
  std::size_t rows() const override { return d_.size(); }
  std::size_t cols() const override { return d_.size(); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    for (std::size_t i = 0; i < d_.size(); ++i) out[i] = d_[i] * in[i];
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    for (std::size_t i = 0; i < d_.size(); ++i) out[i] = std::conj(d_[i]) * in[i];
  }
  std::string describe() const override { return "diag(" + std::to_string(d_.size()) + ")"; }

 private:
  CVec d_;
};

class DenseNode final : public OperatorNode {
 public:
  explicit DenseNode(Eigen::MatrixXcd m) : m_(std::move(m)) {}
  std::size_t rows() const override { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const override { return static_cast<std::size_t>(m_.cols()); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    Eigen::Map<const Eigen::VectorXcd> x(in.data(), m_.cols());
    Eigen::Map<Eigen::VectorXcd> y(out.data(), m_.rows());
    y.noalias() = m_ * x;
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    Eigen::Map<const Eigen::VectorXcd> x(in.data(), m_.rows());
    Eigen::Map<Eigen::VectorXcd> y(out.data(), m_.cols());
    y.noalias() = m_.adjoint() * x;
  }
  std::string describe() const override {
    return "dense(" + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) + ")";
  }

 private:
  Eigen::MatrixXcd m_;
};

class FunctionNode final : public OperatorNode {
 public:
  FunctionNode(std::size_t rows, std::size_t cols, ApplyFn fwd, ApplyFn adj, std::string name)
      : rows_(rows), cols_(cols), fwd_(std::move(fwd)), adj_(std::move(adj)), name_(std::move(name)) {}
  std::size_t rows() const override { return rows_; }
  std::size_t cols() const override { return cols_; }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override { fwd_(in, out); }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override { adj_(in, out); }
  std::string describe() const override { return name_; }

 private:
  std::size_t rows_, cols_;
  ApplyFn fwd_, adj_;
  std::string name_;
};

class GatherNode final : public OperatorNode {
 public:
  GatherNode(LinearOperator inner, std::vector<std::size_t> idx)
      : inner_(std::move(inner)), idx_(std::move(idx)) {}
  std::size_t rows() const override { return idx_.size(); }
  std::size_t cols() const override { return inner_.cols(); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    CVec full(inner_.rows());
    inner_.node()->forward(in, full);
    for (std::size_t i = 0; i < idx_.size(); ++i) out[i] = full[idx_[i]];
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    CVec full(inner_.rows(), cplx{0.0, 0.0});
    for (std::size_t i = 0; i < idx_.size(); ++i) full[idx_[i]] = in[i];
    inner_.node()->adjoint(full, out);
  }
  std::string describe() const override {
    return "rows[" + std::to_string(idx_.size()) + "](" + inner_.describe() + ")";
  }

 private:
  LinearOperator inner_;
  std::vector<std::size_t> idx_;
};

class BlockDiagNode final : public OperatorNode {
 public:
  explicit BlockDiagNode(std::vector<LinearOperator> blocks) : blocks_(std::move(blocks)) {
    for (const auto& b : blocks_) {
      rows_ += b.rows();
      cols_ += b.cols();
    }
  }
  std::size_t rows() const override { return rows_; }
  std::size_t cols() const override { return cols_; }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    std::size_t r = 0, c = 0;
    for (const auto& b : blocks_) {
      b.node()->forward(in.subspan(c, b.cols()), out.subspan(r, b.rows()));
      r += b.rows();
      c += b.cols();
    }
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    std::size_t r = 0, c = 0;
    for (const auto& b : blocks_) {
      b.node()->adjoint(in.subspan(r, b.rows()), out.subspan(c, b.cols()));
      r += b.rows();
      c += b.cols();
    }
  }
  std::string describe() const override {
    return "blockdiag[" + std::to_string(blocks_.size()) + "](" + blocks_.front().describe() + ",...)";
  }

 private:
  std::vector<LinearOperator> blocks_;
  std::size_t rows_ = 0, cols_ = 0;
};

class ComposeNode final : public OperatorNode {
 public:
  ComposeNode(LinearOperator outer, LinearOperator inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {}
  std::size_t rows() const override { return outer_.rows(); }
  std::size_t cols() const override { return inner_.cols(); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override {
    CVec mid(inner_.rows());
    inner_.node()->forward(in, mid);
    outer_.node()->forward(mid, out);
  }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override {
    CVec mid(outer_.cols());
    outer_.node()->adjoint(in, mid);
    inner_.node()->adjoint(mid, out);
  }
  std::string describe() const override { return outer_.describe() + "*" + inner_.describe(); }

 private:
  LinearOperator outer_, inner_;
};

class AdjointNode final : public OperatorNode {
 public:
  explicit AdjointNode(LinearOperator op) : op_(std::move(op)) {}
  std::size_t rows() const override { return op_.cols(); }
  std::size_t cols() const override { return op_.rows(); }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override { op_.node()->adjoint(in, out); }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override { op_.node()->forward(in, out); }
  std::string describe() const override { return "(" + op_.describe() + ")^H"; }

 private:
  LinearOperator op_;
};

class KronIdentityNode final : public OperatorNode {
 public:
  KronIdentityNode(LinearOperator op, std::size_t k) : op_(std::move(op)), k_(k) {}
  std::size_t rows() const override { return op_.rows() * k_; }
  std::size_t cols() const override { return op_.cols() * k_; }
  void forward(std::span<const cplx> in, std::span<cplx> out) const override { run(in, out, false); }
  void adjoint(std::span<const cplx> in, std::span<cplx> out) const override { run(in, out, true); }
  std::string describe() const override { return op_.describe() + "(x)I(" + std::to_string(k_) + ")"; }

 private:
  void run(std::span<const cplx> in, std::span<cplx> out, bool adj) const {
    const std::size_t n_in = adj ? op_.rows() : op_.cols();
    const std::size_t n_out = adj ? op_.cols() : op_.rows();
    CVec a(n_in), b(n_out);
    for (std::size_t lane = 0; lane < k_; ++lane) {
      for (std::size_t c = 0; c < n_in; ++c) a[c] = in[c * k_ + lane];
      if (adj) {
        op_.node()->adjoint(a, b);
      } else {
        op_.node()->forward(a, b);
      }
      for (std::size_t r = 0; r < n_out; ++r) out[r * k_ + lane] = b[r];
    }
  }
  LinearOperator op_;
  std::size_t k_;
};

}  // namespace

LinearOperator::LinearOperator(std::shared_ptr<const OperatorNode> node) : node_(std::move(node)) {
  if (!node_) throw SizeError("null operator node");
  if (node_->rows() == 0 || node_->cols() == 0) throw SizeError("operator dimensions must be positive");
}

void LinearOperator::apply(std::span<const cplx> in, std::span<cplx> out) const {
  require_length(in.size(), cols(), "forward input");
  require_length(out.size(), rows(), "forward output");
  node_->forward(in, out);
}

void LinearOperator::apply_adjoint(std::span<const cplx> in, std::span<cplx> out) const {
  require_length(in.size(), rows(), "adjoint input");
  require_length(out.size(), cols(), "adjoint output");
  node_->adjoint(in, out);
}

CVec LinearOperator::apply(std::span<const cplx> in) const {
  CVec out(rows());
  apply(in, out);
  return out;
}

CVec LinearOperator::apply_adjoint(std::span<const cplx> in) const {
  CVec out(cols());
  apply_adjoint(in, out);
  return out;
}

LinearOperator identity_operator(std::size_t n) { return LinearOperator(std::make_shared<IdentityNode>(n)); }

LinearOperator fft_operator(std::size_t n) {
  return LinearOperator(std::make_shared<KernelNode>(n, KernelKind::Fft));
}

LinearOperator ifft_operator(std::size_t n) {
  return LinearOperator(std::make_shared<KernelNode>(n, KernelKind::Ifft));
}

LinearOperator fwht_operator(std::size_t n) {
  return LinearOperator(std::make_shared<KernelNode>(n, KernelKind::Fwht));
}

LinearOperator permutation_operator(const Permutation& perm) {
  return LinearOperator(std::make_shared<PermutationNode>(perm));
}

LinearOperator diagonal_operator(CVec diag) {
  if (diag.empty()) throw SizeError("diagonal operator needs at least one entry");
  return LinearOperator(std::make_shared<DiagonalNode>(std::move(diag)));
}

LinearOperator dense_operator(Eigen::MatrixXcd matrix) {
  return LinearOperator(std::make_shared<DenseNode>(std::move(matrix)));
}

LinearOperator function_operator(std::size_t rows, std::size_t cols, ApplyFn forward, ApplyFn adjoint,
                                 std::string name) {
  return LinearOperator(
      std::make_shared<FunctionNode>(rows, cols, std::move(forward), std::move(adjoint), std::move(name)));
}

LinearOperator row_select(const LinearOperator& op, std::size_t m) {
  if (m == 0 || m > op.rows()) {
    throw SizeError("row_select: m=" + std::to_string(m) + " outside [1, " + std::to_string(op.rows()) + "]");
  }
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return LinearOperator(std::make_shared<GatherNode>(op, std::move(idx)));
}

LinearOperator row_gather(const LinearOperator& op, std::vector<std::size_t> indices) {
  if (indices.empty()) throw SizeError("row_gather: no rows requested");
  std::vector<bool> seen(op.rows(), false);
  for (auto i : indices) {
    if (i >= op.rows() || seen[i]) throw SizeError("row_gather: indices must be distinct and in range");
    seen[i] = true;
  }
  return LinearOperator(std::make_shared<GatherNode>(op, std::move(indices)));
}

LinearOperator block_diag_union(std::vector<LinearOperator> blocks) {
  if (blocks.empty()) throw SizeError("block_diag_union: empty block list");
  if (blocks.size() == 1) return blocks.front();
  return LinearOperator(std::make_shared<BlockDiagNode>(std::move(blocks)));
}

LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner) {
  if (outer.cols() != inner.rows()) {
    throw SizeError("compose: outer has " + std::to_string(outer.cols()) + " columns, inner has " +
                    std::to_string(inner.rows()) + " rows");
  }
  return LinearOperator(std::make_shared<ComposeNode>(outer, inner));
}

LinearOperator adjoint(const LinearOperator& op) { return LinearOperator(std::make_shared<AdjointNode>(op)); }

LinearOperator kron_identity(const LinearOperator& op, std::size_t k) {
  if (k == 0) throw SizeError("kron_identity: k must be positive");
  if (k == 1) return op;
  return LinearOperator(std::make_shared<KronIdentityNode>(op, k));
}

Eigen::MatrixXcd materialize_dense(const LinearOperator& op, std::size_t limit) {
  if (op.cols() > limit) {
    throw RefusalError("materialize_dense: " + std::to_string(op.cols()) + " columns exceeds limit " +
                       std::to_string(limit));
  }
  Eigen::MatrixXcd dense(op.rows(), op.cols());
  CVec basis(op.cols(), cplx{0.0, 0.0});
  CVec col(op.rows());
  for (std::size_t j = 0; j < op.cols(); ++j) {
    basis[j] = 1.0;
    op.apply(basis, col);
    basis[j] = 0.0;
    for (std::size_t i = 0; i < op.rows(); ++i) dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return dense;
}

}  // namespace ibs
