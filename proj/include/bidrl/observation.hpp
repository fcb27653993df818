#pragma once

#include <cstddef>
#include <vector>

namespace bidrl {

// Per-agent observation: a fixed-width "self" part and an unordered set of
// equally sized feature blocks describing the other objectives.
struct Observation {
  std::vector<float> self;
  std::vector<float> blocks;  // num_blocks() * block_dim, row-major
  int block_dim = 0;

  int num_blocks() const {
    return block_dim == 0 ? 0 : static_cast<int>(blocks.size()) / block_dim;
  }
  const float* block(int j) const { return blocks.data() + static_cast<std::size_t>(j) * block_dim; }
};

// Shape of the observations a network was built for. `fixed_blocks` only
// constrains inputs when attention pooling is disabled.
struct ObservationLayout {
  int self_dim = 0;
  int block_dim = 0;
  int fixed_blocks = 0;

  friend bool operator==(const ObservationLayout&, const ObservationLayout&) = default;
};

// Column-batched observations. Blocks of sample b occupy columns
// [offsets[b], offsets[b+1]) of `blocks`.
struct ObservationBatch {
  int self_dim = 0;
  int block_dim = 0;
  std::vector<float> self;    // batch * self_dim, column per sample
  std::vector<float> blocks;  // total_blocks * block_dim, column per block
  std::vector<int> offsets{0};

  int size() const { return static_cast<int>(offsets.size()) - 1; }
  int total_blocks() const { return offsets.back(); }

  void clear(int self_width, int block_width) {
    self_dim = self_width;
    block_dim = block_width;
    self.clear();
    blocks.clear();
    offsets.assign(1, 0);
  }

  void push(const Observation& obs) {
    self.insert(self.end(), obs.self.begin(), obs.self.end());
    blocks.insert(blocks.end(), obs.blocks.begin(), obs.blocks.end());
    offsets.push_back(offsets.back() + obs.num_blocks());
  }

  void push(const float* self_features, const float* block_features, int num_blocks) {
    self.insert(self.end(), self_features, self_features + self_dim);
    blocks.insert(blocks.end(), block_features,
                  block_features + static_cast<std::size_t>(num_blocks) * block_dim);
    offsets.push_back(offsets.back() + num_blocks);
  }
};

}  // namespace bidrl
