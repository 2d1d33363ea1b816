#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ibs/permutation.hpp"
#include "ibs/types.hpp"

namespace ibs {

/// Implementation interface for matrix-free operators. Nodes are immutable;
/// `forward` and `adjoint` may be called concurrently.
class OperatorNode {
 public:
  virtual ~OperatorNode() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  // `in` and `out` never alias; lengths have been checked by the caller.
  virtual void forward(std::span<const cplx> in, std::span<cplx> out) const = 0;
  virtual void adjoint(std::span<const cplx> in, std::span<cplx> out) const = 0;
  virtual std::string describe() const = 0;
};

/// Value handle for a rows x cols linear map with forward and adjoint
/// application. Copies share the immutable node.
class LinearOperator {
 public:
  explicit LinearOperator(std::shared_ptr<const OperatorNode> node);

  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  std::string describe() const { return node_->describe(); }

  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  void apply_adjoint(std::span<const cplx> in, std::span<cplx> out) const;
  CVec apply(std::span<const cplx> in) const;
  CVec apply_adjoint(std::span<const cplx> in) const;

  const std::shared_ptr<const OperatorNode>& node() const { return node_; }

 private:
  std::shared_ptr<const OperatorNode> node_;
};

using ApplyFn = std::function<void(std::span<const cplx>, std::span<cplx>)>;

LinearOperator identity_operator(std::size_t n);
LinearOperator fft_operator(std::size_t n);   // unitary DFT
LinearOperator ifft_operator(std::size_t n);  // unitary inverse DFT
LinearOperator fwht_operator(std::size_t n);  // unitary Hadamard, natural order
LinearOperator permutation_operator(const Permutation& perm);
LinearOperator diagonal_operator(CVec diag);
LinearOperator dense_operator(Eigen::MatrixXcd matrix);
LinearOperator function_operator(std::size_t rows, std::size_t cols, ApplyFn forward,
                                 ApplyFn adjoint, std::string name);

/// First m rows of `op`. The adjoint zero-pads its input to op.rows().
LinearOperator row_select(const LinearOperator& op, std::size_t m);
/// Rows `indices[0..k)` of `op`, in that order. Indices must be distinct.
LinearOperator row_gather(const LinearOperator& op, std::vector<std::size_t> indices);
/// Block-diagonal union; block l acts on its contiguous input segment.
LinearOperator block_diag_union(std::vector<LinearOperator> blocks);
/// outer * inner.
LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner);
LinearOperator adjoint(const LinearOperator& op);
/// op (x) I_k with the Kronecker index convention (a*k + b).
LinearOperator kron_identity(const LinearOperator& op, std::size_t k);

inline constexpr std::size_t kDefaultDenseLimit = 4096;

/// Applies `op` to each basis vector. Throws RefusalError if op.cols() > limit.
Eigen::MatrixXcd materialize_dense(const LinearOperator& op, std::size_t limit = kDefaultDenseLimit);

}  // namespace ibs
