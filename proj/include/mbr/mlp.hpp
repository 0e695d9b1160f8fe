#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace mbr {

enum class OutputActivation { Linear, Tanh };

inline constexpr double kLeakySlope = 0.01;

/// Fully connected network, leaky-ReLU hidden layers, batch in columns.
/// All parameters live in one contiguous vector (layer by layer: W then b,
/// W column-major) so that optimizers, clipping and soft updates work on a
/// single flat array.
template <typename T>
class Mlp {
 public:
  using Scalar = T;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  struct Cache {
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // post[0] is the input
  };

  Mlp() = default;

  Mlp(std::vector<int> sizes, OutputActivation out) : sizes_(std::move(sizes)), out_(out) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  OutputActivation output_activation() const { return out_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::Map<Matrix> weight(int l) { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
  Eigen::Map<const Matrix> weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vector> bias(int l) {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<const Vector> bias(int l) const {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }

  /// Uniform fan-in initialization; the last layer uses `final_scale`
  /// when positive.
  template <typename Rng>
  void initialize(Rng& rng, T final_scale = T(0)) {
    for (int l = 0; l < layers(); ++l) {
      T bound = T(1) / std::sqrt(static_cast<T>(sizes_[l]));
      if (l == layers() - 1 && final_scale > T(0)) bound = final_scale;
      std::uniform_real_distribution<double> u(-static_cast<double>(bound), static_cast<double>(bound));
      auto w = weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<T>(u(rng));
      auto b = bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = static_cast<T>(u(rng));
    }
  }

  Matrix forward(const Matrix& x) const {
    Cache c;
    forward(x, c);
    return c.post.back();
  }

  /// Fills `cache` (reusing its storage) and returns the network output.
  const Matrix& forward(const Matrix& x, Cache& cache) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("input dimension mismatch");
    const int n = layers();
    cache.pre.resize(static_cast<std::size_t>(n));
    cache.post.resize(static_cast<std::size_t>(n + 1));
    cache.post[0] = x;
    for (int l = 0; l < n; ++l) {
      Matrix& z = cache.pre[static_cast<std::size_t>(l)];
      z.noalias() = weight(l) * cache.post[static_cast<std::size_t>(l)];
      z.colwise() += bias(l);
      Matrix& h = cache.post[static_cast<std::size_t>(l + 1)];
      if (l + 1 < n) {
        h = z.unaryExpr([](T v) { return v > T(0) ? v : static_cast<T>(kLeakySlope) * v; });
      } else if (out_ == OutputActivation::Tanh) {
        h = z.array().tanh().matrix();
      } else {
        h = z;
      }
    }
    return cache.post.back();
  }

  /// Reverse pass. `grad_out` is dL/d(output); parameter gradients are
  /// accumulated into `grad` (sized like params()) unless it is null.
  /// Returns dL/d(input).
  Matrix backward(const Cache& cache, const Matrix& grad_out, Vector* grad) const {
    const int n = layers();
    if (grad && grad->size() != params_.size()) *grad = Vector::Zero(params_.size());
    Matrix delta = grad_out;
    if (out_ == OutputActivation::Tanh) {
      delta.array() *= T(1) - cache.post.back().array().square();
    }
    for (int l = n - 1; l >= 0; --l) {
      if (grad) {
        const Matrix& in = cache.post[static_cast<std::size_t>(l)];
        Eigen::Map<Matrix> gw(grad->data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<Vector> gb(grad->data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
        gw.noalias() += delta * in.transpose();
        gb += delta.rowwise().sum();
      }
      Matrix prev;
      prev.noalias() = weight(l).transpose() * delta;
      if (l > 0) {
        const Matrix& z = cache.pre[static_cast<std::size_t>(l - 1)];
        prev.array() *= z.array().unaryExpr([](T v) { return v > T(0) ? T(1) : static_cast<T>(kLeakySlope); });
      }
      delta = std::move(prev);
    }
    return delta;
  }

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out(sizes_, out_);
    out.params() = params_.template cast<U>();
    return out;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  OutputActivation out_ = OutputActivation::Linear;
  Vector params_;
};

/// Adaptive-moment optimizer over a flat parameter vector.
template <typename T>
struct Adam {
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  Vector m;
  Vector v;
  long long t = 0;

  Adam() = default;
  Adam(Eigen::Index n, T learning_rate) : lr(learning_rate), m(Vector::Zero(n)), v(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    ++t;
    m = beta1 * m + (T(1) - beta1) * grad;
    v = beta2 * v + (T(1) - beta2) * grad.cwiseAbs2();
    const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
    const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

/// Elementwise clamp to [-bound, bound].
template <typename Derived>
void clip_gradients(Eigen::MatrixBase<Derived>& g, typename Derived::Scalar bound) {
  if (!(bound > 0)) throw std::invalid_argument("clip bound must be positive");
  g = g.cwiseMax(-bound).cwiseMin(bound);
}

/// target <- rate * online + (1 - rate) * target
template <typename T>
void soft_update(Mlp<T>& target, const Mlp<T>& online, T rate) {
  target.params() = rate * online.params() + (T(1) - rate) * target.params();
}

/// Mean-squared error of a scalar critic against targets y (1 x B).
/// Returns the loss and writes dL/dparams into grad.
template <typename T>
T critic_mse_gradient(const Mlp<T>& critic, const typename Mlp<T>::Matrix& inputs,
                      const typename Mlp<T>::Matrix& targets, typename Mlp<T>::Vector& grad,
                      typename Mlp<T>::Cache& cache) {
  const auto& q = critic.forward(inputs, cache);
  const typename Mlp<T>::Matrix diff = q - targets;
  const T count = static_cast<T>(diff.cols());
  grad.setZero(critic.parameter_count());
  critic.backward(cache, (T(2) / count) * diff, &grad);
  return diff.squaredNorm() / count;
}

/// Actor objective J = mean_i Q(s_i, pi(s_i)) through the critic.
/// Writes dJ/d(actor params) into grad and returns J.
template <typename T>
T actor_objective_gradient(const Mlp<T>& actor, const Mlp<T>& critic,
                           const typename Mlp<T>::Matrix& states, typename Mlp<T>::Vector& grad,
                           typename Mlp<T>::Cache& actor_cache, typename Mlp<T>::Cache& critic_cache) {
  using Matrix = typename Mlp<T>::Matrix;
  const Matrix& actions = actor.forward(states, actor_cache);
  Matrix input(states.rows() + actions.rows(), states.cols());
  input.topRows(states.rows()) = states;
  input.bottomRows(actions.rows()) = actions;
  const Matrix& q = critic.forward(input, critic_cache);
  const T count = static_cast<T>(q.cols());
  const Matrix d_input = critic.backward(critic_cache, Matrix::Constant(1, q.cols(), T(1) / count), nullptr);
  grad.setZero(actor.parameter_count());
  actor.backward(actor_cache, d_input.bottomRows(actions.rows()), &grad);
  return q.sum() / count;
}

}  // namespace mbr
