#include "bvrvi/block_vector.hpp"

#include <string>

namespace bvrvi {

BlockLayout::BlockLayout(std::vector<Index> lengths) : lengths_(std::move(lengths)) {
  offsets_.reserve(lengths_.size());
  for (Index len : lengths_) {
    if (len <= 0) throw LayoutError("block lengths must be positive");
    offsets_.push_back(dimension_);
    dimension_ += len;
  }
}

BlockLayout BlockLayout::uniform(Index num_blocks, Index length) {
  return BlockLayout(std::vector<Index>(static_cast<std::size_t>(num_blocks), length));
}

void require_same_layout(const BlockLayout& a, const BlockLayout& b, const char* what) {
  if (!(a == b)) throw LayoutError(std::string("block layout mismatch: ") + what);
}

double pairing(const DualVector& v, const BlockVector& x) {
  require_same_layout(v.layout(), x.layout(), "pairing");
  return v.values().dot(x.values());
}

}  // namespace bvrvi
