#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <mutex>
#include <random>
#include <vector>

#include "mbr/env.hpp"

namespace mbr {

using Real = float;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

struct Transition {
  Observation obs;
  Action action;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
  double split = 0.0;  // lambda of the generating episode
};

/// Column-per-sample minibatch.
struct Batch {
  RMatrix obs;       // kObsDim x B
  RMatrix action;    // kActDim x B
  RMatrix reward;    // 1 x B
  RMatrix next_obs;  // kObsDim x B
  RMatrix done;      // 1 x B

  Eigen::Index size() const { return obs.cols(); }
  void resize(Eigen::Index n);
  static Batch concat(const std::vector<Batch>& parts);
};

/// Fixed-capacity ring buffer. One writer and one reader may use it
/// concurrently; sampling holds the lock for the whole draw.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double split);

  void add(const Transition& t);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  double split() const { return split_; }

  /// Uniform sampling with replacement into columns [offset, offset + n).
  void sample(std::size_t n, std::mt19937_64& rng, Batch& out, Eigen::Index offset = 0) const;

  /// Lambda tag of every stored transition, oldest slot order.
  std::vector<double> stored_splits() const;

 private:
  std::size_t capacity_;
  double split_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  RMatrix obs_, action_, reward_, next_obs_, done_;
  std::vector<double> tags_;
  mutable std::mutex mutex_;
};

/// N replay buffers, one per domain-randomization value.
class MultiBuffer {
 public:
  /// `splits` are the lambda values; with `separate` false all episodes go
  /// to one buffer of capacity N * capacity.
  MultiBuffer(std::vector<double> splits, std::size_t capacity, bool separate = true);

  std::size_t domains() const { return splits_.size(); }
  double split(std::size_t k) const { return splits_.at(k); }
  bool separate() const { return separate_; }

  ReplayBuffer& buffer_for_domain(std::size_t k) { return *buffers_.at(separate_ ? k : 0); }
  const std::vector<std::unique_ptr<ReplayBuffer>>& buffers() const { return buffers_; }

  /// Every buffer can provide `per_buffer` samples (scaled by N when pooled).
  bool ready(std::size_t per_buffer) const;

  /// One minibatch per buffer, concatenated (pooled: one batch of N * per_buffer).
  Batch sample(std::size_t per_buffer, std::mt19937_64& rng) const;

 private:
  std::vector<double> splits_;
  bool separate_;
  std::vector<std::unique_ptr<ReplayBuffer>> buffers_;
};

/// N evenly spaced values over [lo, hi].
std::vector<double> even_splits(std::size_t n, double lo, double hi);

}  // namespace mbr
