#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "bvrvi/errors.hpp"

namespace bvrvi {

using Index = Eigen::Index;

/// Fixed partition of a coordinate vector into consecutive blocks, one block
/// per constraint factor (e.g. the x and y players of a game).
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<Index> lengths);
  BlockLayout(std::initializer_list<Index> lengths)
      : BlockLayout(std::vector<Index>(lengths)) {}

  /// n blocks of equal length.
  static BlockLayout uniform(Index num_blocks, Index length);

  Index num_blocks() const { return static_cast<Index>(lengths_.size()); }
  Index block_size(Index b) const { return lengths_[static_cast<std::size_t>(b)]; }
  Index offset(Index b) const { return offsets_[static_cast<std::size_t>(b)]; }
  Index dimension() const { return dimension_; }

  bool operator==(const BlockLayout& other) const { return lengths_ == other.lengths_; }

 private:
  std::vector<Index> lengths_;
  std::vector<Index> offsets_;
  Index dimension_ = 0;
};

/// Dense real vector carrying a block layout. `Space` separates primal points
/// from dual elements (mirror images, operator values) at compile time.
template <class Space>
class BlockVec {
 public:
  BlockVec() = default;

  /// Throws LayoutError on a size mismatch and DomainError on NaN/Inf entries.
  BlockVec(BlockLayout layout, Eigen::VectorXd values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_.dimension()) {
      throw LayoutError("vector size does not match block layout dimension");
    }
    if (!values_.allFinite()) throw DomainError("vector has non-finite entries");
  }

  static BlockVec zeros(const BlockLayout& layout) {
    return BlockVec(layout, Eigen::VectorXd::Zero(layout.dimension()));
  }
  static BlockVec constant(const BlockLayout& layout, double value) {
    return BlockVec(layout, Eigen::VectorXd::Constant(layout.dimension(), value));
  }

  const BlockLayout& layout() const { return layout_; }
  Index size() const { return values_.size(); }

  const Eigen::VectorXd& values() const { return values_; }
  // Callers writing through this keep the entries finite.
  Eigen::VectorXd& values() { return values_; }

  auto block(Index b) const { return values_.segment(layout_.offset(b), layout_.block_size(b)); }
  auto block(Index b) { return values_.segment(layout_.offset(b), layout_.block_size(b)); }

  double operator[](Index i) const { return values_[i]; }

  bool operator==(const BlockVec& other) const {
    return layout_ == other.layout_ && values_ == other.values_;
  }

 private:
  BlockLayout layout_;
  Eigen::VectorXd values_;
};

struct PrimalSpace;
struct DualSpace;

using BlockVector = BlockVec<PrimalSpace>;
using DualVector = BlockVec<DualSpace>;

/// Throws LayoutError unless both layouts match.
void require_same_layout(const BlockLayout& a, const BlockLayout& b, const char* what);

/// Euclidean pairing of a dual element with a primal vector.
double pairing(const DualVector& v, const BlockVector& x);

}  // namespace bvrvi
