#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"
#include "embias/rng.hpp"

namespace embias {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Classifier parse_classifier(std::string_view name) {
  if (name == "logistic" || name == "lr") return Classifier::Logistic;
  if (name == "mlp") return Classifier::Mlp;
  throw Error(fmt::format("unknown classifier '{}'", name));
}

double LogisticRegression::loss_and_gradient(const Matrix& x, std::span<const int> y, const Vector& params,
                                             double lambda, Vector& grad) {
  const Eigen::Index d = x.cols();
  const auto w = params.head(d);
  const double b = params(d);
  const Eigen::VectorXd z = (x * w).array() + b;
  const double n = static_cast<double>(x.rows());

  double loss = 0.0;
  Eigen::VectorXd resid(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    loss += softplus(z(i)) - yi * z(i);
    resid(i) = sigmoid(z(i)) - yi;
  }
  loss = loss / n + 0.5 * lambda * w.squaredNorm();

  grad.resize(d + 1);
  grad.head(d) = x.transpose() * resid / n + lambda * w;
  grad(d) = resid.sum() / n;
  return loss;
}

void LogisticRegression::fit(const Matrix& x, std::span<const int> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || x.rows() == 0) throw Error("LogisticRegression: bad shapes");
  params_ = Vector::Zero(x.cols() + 1);
  Vector grad, trial_grad;
  double loss = loss_and_gradient(x, y, params_, options_.lambda, grad);
  double step = 1.0;
  epochs_ = 0;
  grad_norm_ = grad.norm();
  while (epochs_ < options_.max_epochs && grad_norm_ >= options_.tolerance) {
    const double g2 = grad.squaredNorm();
    // Armijo backtracking.
    Vector trial;
    double trial_loss;
    while (true) {
      trial = params_ - step * grad;
      trial_loss = loss_and_gradient(x, y, trial, options_.lambda, trial_grad);
      if (trial_loss <= loss - 0.5 * step * g2 || step < 1e-12) break;
      step *= 0.5;
    }
    params_ = std::move(trial);
    loss = trial_loss;
    grad = trial_grad;
    grad_norm_ = grad.norm();
    step = std::min(step * 2.0, 1e6);
    ++epochs_;
  }
}

std::vector<int> LogisticRegression::predict(const Matrix& x) const {
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd z = (x * params_.head(d)).array() + params_(d);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = z(i) > 0.0 ? 1 : 0;
  return out;
}

void Mlp::fit(const Matrix& x, std::span<const int> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || x.rows() == 0) throw Error("Mlp: bad shapes");
  const Eigen::Index d = x.cols();
  const int h = options_.hidden;
  Rng rng(options_.seed);
  // He initialisation for the rectified layer.
  w1_.resize(h, d);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = s1 * rng.normal();
  b1_ = Eigen::VectorXd::Zero(h);
  w2_.resize(h);
  const double s2 = std::sqrt(1.0 / static_cast<double>(h));
  for (Eigen::Index i = 0; i < h; ++i) w2_(i) = s2 * rng.normal();
  b2_ = 0.0;

  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < options_.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options_.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options_.batch));
      Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(h, d);
      Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(h);
      Eigen::VectorXd gw2 = Eigen::VectorXd::Zero(h);
      double gb2 = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto xi = x.row(static_cast<Eigen::Index>(order[k])).transpose();
        const Eigen::VectorXd pre = w1_ * xi + b1_;
        const Eigen::VectorXd act = pre.cwiseMax(0.0);
        const double err = sigmoid(w2_.dot(act) + b2_) - y[order[k]];
        gw2 += err * act;
        gb2 += err;
        const Eigen::VectorXd delta = (err * w2_).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        gw1 += delta * xi.transpose();
        gb1 += delta;
      }
      const double scale = options_.step / static_cast<double>(end - start);
      w1_ -= scale * gw1;
      b1_ -= scale * gb1;
      w2_ -= scale * gw2;
      b2_ -= scale * gb2;
    }
  }
}

std::vector<int> Mlp::predict(const Matrix& x) const {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd act = (w1_ * x.row(i).transpose() + b1_).cwiseMax(0.0);
    out[static_cast<std::size_t>(i)] = (w2_.dot(act) + b2_) > 0.0 ? 1 : 0;
  }
  return out;
}

double recoverability(const Embedding& deb, const LabeledWordSet& wordset, double train_frac, Classifier classifier,
                      std::uint64_t seed, bool normalize) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("recoverability: train_frac must be in (0, 1)");

  std::vector<std::size_t> per_class[2];
  for (std::size_t i = 0; i < wordset.size(); ++i) per_class[wordset.labels[i] == Group::F ? 1 : 0].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> train, test;
  for (auto& members : per_class) {
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(members.size())));
    if (n_train == 0 || n_train >= members.size()) {
      throw Error(fmt::format("recoverability: degenerate split ({} of {} words for training)", n_train, members.size()));
    }
    train.insert(train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    test.insert(test.end(), members.begin() + static_cast<long>(n_train), members.end());
  }

  auto build = [&](const std::vector<std::size_t>& ids, Matrix& x, std::vector<int>& y) {
    x.resize(static_cast<Eigen::Index>(ids.size()), deb.dim());
    y.resize(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& word = wordset.words.words[ids[k]];
      auto idx = deb.index_of(word);
      if (!idx) throw NotFoundError(fmt::format("recoverability: '{}' missing from debiased embedding", word));
      x.row(static_cast<Eigen::Index>(k)) = deb.row(*idx);
      if (normalize) {
        const double n = x.row(static_cast<Eigen::Index>(k)).norm();
        if (n > 0.0) x.row(static_cast<Eigen::Index>(k)) /= n;
      }
      y[k] = wordset.labels[ids[k]] == Group::F ? 1 : 0;
    }
  };
  Matrix xtr, xte;
  std::vector<int> ytr, yte;
  build(train, xtr, ytr);
  build(test, xte, yte);

  std::vector<int> pred;
  if (classifier == Classifier::Logistic) {
    LogisticRegression lr;
    lr.fit(xtr, ytr);
    pred = lr.predict(xte);
  } else {
    Mlp::Options opts;
    opts.seed = seed;
    Mlp mlp(opts);
    mlp.fit(xtr, ytr);
    pred = mlp.predict(xte);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < yte.size(); ++i) correct += (pred[i] == yte[i]);
  return static_cast<double>(correct) / static_cast<double>(yte.size());
}

}  // namespace embias
