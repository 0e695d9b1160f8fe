#include "mbr/replay.hpp"

#include <memory>
#include <stdexcept>

namespace mbr {

void Batch::resize(Eigen::Index n) {
  obs.resize(kObsDim, n);
  action.resize(kActDim, n);
  reward.resize(1, n);
  next_obs.resize(kObsDim, n);
  done.resize(1, n);
}

Batch Batch::concat(const std::vector<Batch>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Batch out;
  out.resize(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const Eigen::Index m = p.size();
    out.obs.middleCols(at, m) = p.obs;
    out.action.middleCols(at, m) = p.action;
    out.reward.middleCols(at, m) = p.reward;
    out.next_obs.middleCols(at, m) = p.next_obs;
    out.done.middleCols(at, m) = p.done;
    at += m;
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double split)
    : capacity_(capacity), split_(split) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  const auto c = static_cast<Eigen::Index>(capacity);
  obs_.resize(kObsDim, c);
  action_.resize(kActDim, c);
  reward_.resize(1, c);
  next_obs_.resize(kObsDim, c);
  done_.resize(1, c);
  tags_.resize(capacity);
}

void ReplayBuffer::add(const Transition& t) {
  std::lock_guard lock(mutex_);
  const auto i = static_cast<Eigen::Index>(next_);
  obs_.col(i) = t.obs.cast<Real>();
  action_.col(i) = t.action.cast<Real>();
  reward_(0, i) = static_cast<Real>(t.reward);
  next_obs_.col(i) = t.next_obs.cast<Real>();
  done_(0, i) = t.done ? Real(1) : Real(0);
  tags_[next_] = t.split;
  next_ = (next_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return size_;
}

void ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng, Batch& out, Eigen::Index offset) const {
  std::lock_guard lock(mutex_);
  if (size_ == 0) throw std::runtime_error("cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = static_cast<Eigen::Index>(pick(rng));
    const Eigen::Index c = offset + static_cast<Eigen::Index>(j);
    out.obs.col(c) = obs_.col(i);
    out.action.col(c) = action_.col(i);
    out.reward(0, c) = reward_(0, i);
    out.next_obs.col(c) = next_obs_.col(i);
    out.done(0, c) = done_(0, i);
  }
}

std::vector<double> ReplayBuffer::stored_splits() const {
  std::lock_guard lock(mutex_);
  return {tags_.begin(), tags_.begin() + static_cast<std::ptrdiff_t>(size_)};
}

MultiBuffer::MultiBuffer(std::vector<double> splits, std::size_t capacity, bool separate)
    : splits_(std::move(splits)), separate_(separate) {
  if (splits_.empty()) throw std::invalid_argument("at least one domain is required");
  if (separate_) {
    for (double s : splits_) buffers_.push_back(std::make_unique<ReplayBuffer>(capacity, s));
  } else {
    buffers_.push_back(std::make_unique<ReplayBuffer>(capacity * splits_.size(), -1.0));
  }
}

bool MultiBuffer::ready(std::size_t per_buffer) const {
  const std::size_t need = separate_ ? per_buffer : per_buffer * splits_.size();
  for (const auto& b : buffers_)
    if (b->size() < need) return false;
  return true;
}

Batch MultiBuffer::sample(std::size_t per_buffer, std::mt19937_64& rng) const {
  Batch out;
  out.resize(static_cast<Eigen::Index>(per_buffer * splits_.size()));
  if (separate_) {
    for (std::size_t k = 0; k < buffers_.size(); ++k) {
      buffers_[k]->sample(per_buffer, rng, out, static_cast<Eigen::Index>(k * per_buffer));
    }
  } else {
    buffers_[0]->sample(per_buffer * splits_.size(), rng, out, 0);
  }
  return out;
}

std::vector<double> even_splits(std::size_t n, double lo, double hi) {
  if (n == 0) throw std::invalid_argument("need at least one split value");
  if (n == 1) return {hi};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace mbr
