#include "looptrack/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "looptrack/error.hpp"

namespace looptrack {

FeatureVector preprocess(std::span<const Point2> points, std::size_t m) {
  require(points.size() >= 8, ErrorKind::InvalidInput, "a loop needs at least 8 points");
  require(m >= 4, ErrorKind::InvalidInput, "resample count must be at least 4");
  double min_x = points[0].x(), max_x = points[0].x();
  for (const auto& p : points) {
    require(all_finite(p), ErrorKind::InvalidInput, "non-finite point");
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
  }
  const double tie = 1e-9 * std::max(max_x - min_x, 1e-300);
  std::size_t start = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].x() >= max_x - tie &&
        (points[start].x() < max_x - tie || points[i].y() > points[start].y())) {
      start = i;
    }
  }

  const std::size_t n = points.size();
  std::vector<Point2> resampled(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double u = static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(m);
    const auto lo = static_cast<std::size_t>(std::floor(u));
    const double frac = u - static_cast<double>(lo);
    const Point2& p0 = points[(start + lo) % n];
    const Point2& p1 = points[(start + lo + 1) % n];
    resampled[j] = frac == 0.0 ? p0 : Point2((1.0 - frac) * p0 + frac * p1);
  }

  const Point2 c = centroid(resampled);
  const double rms = rms_radius(resampled);
  require(rms > 0.0, ErrorKind::InvalidInput, "loop has zero extent");
  FeatureVector fv;
  fv.m = m;
  fv.values.resize(static_cast<Eigen::Index>(2 * m));
  for (std::size_t j = 0; j < m; ++j) {
    const Point2 q = (resampled[j] - c) / rms;
    fv.values(static_cast<Eigen::Index>(j)) = q.x();
    fv.values(static_cast<Eigen::Index>(m + j)) = q.y();
  }
  return fv;
}

SyntheticLoop synthesize_loop(CurveFamily family, double noise_std, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> shape(0.5, 5.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> offset(-10.0, 10.0);
  std::uniform_int_distribution<int> count(64, 256);
  std::bernoulli_distribution arc_spacing(0.5);

  SyntheticLoop loop;
  loop.model.family = family;
  loop.model.params.a = shape(rng);
  if (arity(family) == 2) loop.model.params.b = shape(rng);
  loop.model.pose.theta = angle(rng);
  loop.model.pose.x0 = offset(rng);
  loop.model.pose.y0 = offset(rng);
  const double phase = angle(rng);
  const auto n = static_cast<std::size_t>(count(rng));

  std::vector<Point2> canonical;
  if (arc_spacing(rng)) {
    canonical = sample_arclength(family, loop.model.params, n, phase);
  } else {
    canonical.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      canonical.push_back(point_at(family, loop.model.params,
                                   phase + kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
    }
  }
  loop.clean.reserve(n);
  for (const auto& q : canonical) loop.clean.push_back(from_canonical(loop.model.pose, q));

  loop.noisy = loop.clean;
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std * loop.model.params.a);
    for (auto& p : loop.noisy) {
      p.x() += noise(rng);
      p.y() += noise(rng);
    }
  }
  return loop;
}

Dataset generate_dataset(std::size_t n_per_class, double noise_std, std::uint64_t seed,
                         std::size_t m) {
  require(n_per_class >= 1, ErrorKind::InvalidInput, "need at least one loop per class");
  require(noise_std >= 0.0, ErrorKind::InvalidInput, "noise must be non-negative");
  std::mt19937_64 rng(seed);
  Dataset data;
  data.m = m;
  data.features.reserve(n_per_class * kFamilyCount);
  data.labels.reserve(n_per_class * kFamilyCount);
  for (CurveFamily family : kAllFamilies) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const SyntheticLoop loop = synthesize_loop(family, noise_std, rng);
      data.features.push_back(preprocess(loop.noisy, m).values);
      data.labels.push_back(family_label(family));
    }
  }
  return data;
}

std::size_t NetworkModel::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t NetworkModel::output_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows());
}

namespace {

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    auto col = z.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
}

void apply(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::Relu) {
    z = z.cwiseMax(0.0);
  } else {
    softmax_columns(z);
  }
}

// Forward pass that keeps every layer's activation (index 0 = inputs).
std::vector<Eigen::MatrixXd> forward_all(const NetworkModel& net, const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(inputs);
  for (const auto& layer : net.layers) {
    Eigen::MatrixXd z = layer.weights * acts.back();
    z.colwise() += layer.bias;
    apply(layer.activation, z);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_network(const NetworkModel& net) {
  require(!net.layers.empty(), ErrorKind::Configuration, "network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    require(l.bias.size() == l.weights.rows(), ErrorKind::Configuration, "bias size mismatch");
    if (i > 0) {
      require(l.weights.cols() == net.layers[i - 1].weights.rows(), ErrorKind::Configuration,
              "consecutive layer dimensions do not match");
    }
    const bool last = i + 1 == net.layers.size();
    require((l.activation == Activation::Softmax) == last, ErrorKind::Configuration,
            "softmax must be the output activation only");
  }
}

Eigen::MatrixXd batch_matrix(const Dataset& data, std::span<const std::size_t> idx) {
  const Eigen::Index dim = data.features.front().size();
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = data.features[idx[j]];
  return x;
}

}  // namespace

Eigen::MatrixXd NetworkModel::forward(const Eigen::MatrixXd& inputs) const {
  check_network(*this);
  require(static_cast<std::size_t>(inputs.rows()) == input_size(), ErrorKind::InvalidInput,
          "input length does not match the network");
  return forward_all(*this, inputs).back();
}

NetworkModel init_network(std::span<const std::size_t> sizes, std::uint64_t seed) {
  require(sizes.size() >= 2, ErrorKind::Configuration, "network needs input and output sizes");
  std::mt19937_64 rng(seed);
  NetworkModel net;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    require(sizes[i - 1] > 0 && sizes[i] > 0, ErrorKind::Configuration, "layer sizes must be positive");
    DenseLayer layer;
    const auto in = static_cast<Eigen::Index>(sizes[i - 1]);
    const auto out = static_cast<Eigen::Index>(sizes[i]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = i + 1 == sizes.size() ? Activation::Softmax : Activation::Relu;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

double loss_and_gradient(const NetworkModel& net, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels, Gradients* grad) {
  check_network(net);
  require(static_cast<std::size_t>(inputs.cols()) == labels.size(), ErrorKind::InvalidInput,
          "one label per input column");
  require(static_cast<std::size_t>(inputs.rows()) == net.input_size(), ErrorKind::Configuration,
          "input length does not match the network");
  const auto acts = forward_all(net, inputs);
  const Eigen::MatrixXd& probs = acts.back();
  const double batch = static_cast<double>(labels.size());

  double loss = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    require(labels[j] >= 0 && labels[j] < probs.rows(), ErrorKind::Configuration, "label out of range");
    loss -= std::log(std::max(probs(labels[j], static_cast<Eigen::Index>(j)), 1e-300));
  }
  loss /= batch;
  if (grad == nullptr) return loss;

  const std::size_t nl = net.layers.size();
  grad->weights.resize(nl);
  grad->bias.resize(nl);
  // softmax + cross-entropy: dL/dz = (p - onehot) / batch
  Eigen::MatrixXd delta = probs;
  for (std::size_t j = 0; j < labels.size(); ++j) delta(labels[j], static_cast<Eigen::Index>(j)) -= 1.0;
  delta /= batch;
  for (std::size_t li = nl; li-- > 0;) {
    grad->weights[li] = delta * acts[li].transpose();
    grad->bias[li] = delta.rowwise().sum();
    if (li > 0) {
      Eigen::MatrixXd back = net.layers[li].weights.transpose() * delta;
      delta = back.cwiseProduct((acts[li].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

std::vector<double> train_epochs(NetworkModel& net, const Dataset& data, const TrainOptions& opts) {
  require(data.size() > 0, ErrorKind::InvalidInput, "training dataset is empty");
  require(opts.optimizer == "adam", ErrorKind::Configuration, "only the adam optimizer is supported");
  require(opts.batch_size > 0 && opts.epochs >= 0 && opts.learning_rate > 0.0,
          ErrorKind::Configuration, "invalid training hyperparameters");
  check_network(net);
  require(static_cast<std::size_t>(data.features.front().size()) == net.input_size(),
          ErrorKind::Configuration, "dataset feature length does not match the network input");

  const std::size_t nl = net.layers.size();
  Gradients m1, m2, g;
  for (const auto& l : net.layers) {
    m1.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    m1.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  m2 = m1;

  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;
  std::vector<double> epoch_loss;
  long step = 0;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(data.labels[i]);
      const double loss = loss_and_gradient(net, batch_matrix(data, idx), labels, &g);
      loss_sum += loss * static_cast<double>(idx.size());

      ++step;
      const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
      const double lr = opts.learning_rate * std::sqrt(c2) / c1;
      const double eps_hat = opts.epsilon * std::sqrt(c2);
      for (std::size_t li = 0; li < nl; ++li) {
        m1.weights[li] = opts.beta1 * m1.weights[li] + (1.0 - opts.beta1) * g.weights[li];
        m2.weights[li] = opts.beta2 * m2.weights[li] + (1.0 - opts.beta2) * g.weights[li].cwiseAbs2();
        net.layers[li].weights.array() -=
            lr * m1.weights[li].array() / (m2.weights[li].array().sqrt() + eps_hat);
        m1.bias[li] = opts.beta1 * m1.bias[li] + (1.0 - opts.beta1) * g.bias[li];
        m2.bias[li] = opts.beta2 * m2.bias[li] + (1.0 - opts.beta2) * g.bias[li].cwiseAbs2();
        net.layers[li].bias.array() -= lr * m1.bias[li].array() / (m2.bias[li].array().sqrt() + eps_hat);
      }
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return epoch_loss;
}

NetworkModel train(const Dataset& data, const TrainOptions& opts) {
  require(data.size() > 0, ErrorKind::InvalidInput, "training dataset is empty");
  std::vector<std::size_t> sizes = {static_cast<std::size_t>(data.features.front().size())};
  sizes.insert(sizes.end(), opts.hidden.begin(), opts.hidden.end());
  sizes.push_back(kFamilyCount);
  NetworkModel net = init_network(sizes, opts.seed);
  net.m = data.m;
  net.training.options = opts;
  net.training.epoch_loss = train_epochs(net, data, opts);
  net.training.final_accuracy = accuracy(net, data);
  net.training.samples = data.size();
  return net;
}

double accuracy(const NetworkModel& net, const Dataset& data) {
  require(data.size() > 0, ErrorKind::InvalidInput, "dataset is empty");
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 512;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t end = std::min(data.size(), begin + kChunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Eigen::MatrixXd probs = net.forward(batch_matrix(data, idx));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Eigen::Index arg = 0;
      probs.col(static_cast<Eigen::Index>(j)).maxCoeff(&arg);
      if (arg == data.labels[idx[j]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ClassProbabilities classify(const NetworkModel& net, const FeatureVector& fv) {
  require(net.output_size() == kFamilyCount, ErrorKind::Configuration,
          "classifier output must have one entry per family");
  require(static_cast<std::size_t>(fv.values.size()) == net.input_size(), ErrorKind::InvalidInput,
          "feature length " + std::to_string(fv.values.size()) + " does not match network input " +
              std::to_string(net.input_size()));
  const Eigen::MatrixXd probs = net.forward(fv.values);
  ClassProbabilities out{};
  for (int i = 0; i < kFamilyCount; ++i) out[static_cast<std::size_t>(i)] = probs(i, 0);
  return out;
}

CurveFamily argmax_family(const ClassProbabilities& p) {
  const auto it = std::max_element(p.begin(), p.end());
  return family_from_label(static_cast<int>(std::distance(p.begin(), it)));
}

}  // namespace looptrack
