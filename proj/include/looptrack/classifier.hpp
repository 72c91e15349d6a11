#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "looptrack/transform2d.hpp"

namespace looptrack {

/// One loop resampled to m points and laid out as [x_0..x_(m-1), y_0..y_(m-1)].
struct FeatureVector {
  Eigen::VectorXd values;
  std::size_t m = 0;
};

using ClassProbabilities = std::array<double, kFamilyCount>;

inline constexpr std::size_t kDefaultResample = 64;

/// Canonicalizes a loop for the network: roll to start at the point of
/// maximum x (ties broken by maximum y), resample to m points by uniform index
/// interpolation around the closed loop, subtract the centroid and scale to
/// unit RMS radius. Invariant to translation, uniform scale and cyclic
/// relabeling; idempotent.
FeatureVector preprocess(std::span<const Point2> points, std::size_t m = kDefaultResample);

/// A synthetic training loop with the model that generated it.
struct SyntheticLoop {
  CurveModel model;
  std::vector<Point2> clean;
  std::vector<Point2> noisy;
};

/// Random shape (a, b in [0.5, 5]), pose (theta in [0, 2pi), offsets in
/// [-10, 10]), start phase, point count in [64, 256], and either uniform-
/// parameter or uniform-arc-length spacing. Noise is Gaussian with standard
/// deviation noise_std * a per axis.
SyntheticLoop synthesize_loop(CurveFamily family, double noise_std, std::mt19937_64& rng);

struct Dataset {
  std::size_t m = kDefaultResample;
  std::vector<Eigen::VectorXd> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// n_per_class loops of each family, in family order; deterministic in seed.
Dataset generate_dataset(std::size_t n_per_class, double noise_std, std::uint64_t seed,
                         std::size_t m = kDefaultResample);

enum class Activation { Relu, Softmax };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Relu;
};

struct TrainOptions {
  std::string optimizer = "adam";
  double learning_rate = 1e-4;
  int epochs = 9;
  std::size_t batch_size = 16;
  std::vector<std::size_t> hidden = {256, 128};
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainingInfo {
  TrainOptions options;
  std::vector<double> epoch_loss;
  double final_accuracy = 0.0;
  std::size_t samples = 0;
};

/// Feed-forward classifier: ReLU hidden layers and a softmax output.
struct NetworkModel {
  std::size_t m = kDefaultResample;  // resample count expected by preprocess
  std::vector<DenseLayer> layers;
  TrainingInfo training;

  std::size_t input_size() const;
  std::size_t output_size() const;
  /// Column-wise forward pass; returns class probabilities per column.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
};

/// Random network with fan-in scaled uniform weights (He-uniform) and zero biases.
NetworkModel init_network(std::span<const std::size_t> sizes, std::uint64_t seed);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

/// Mean cross-entropy of a batch (columns of `inputs`) and its gradient.
double loss_and_gradient(const NetworkModel& net, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels, Gradients* grad);

/// Trains a fresh network on the dataset with mini-batch Adam.
NetworkModel train(const Dataset& data, const TrainOptions& opts = {});

/// Continues training an existing network in place; returns per-epoch mean loss.
std::vector<double> train_epochs(NetworkModel& net, const Dataset& data, const TrainOptions& opts);

/// Fraction of dataset samples whose argmax matches the label.
double accuracy(const NetworkModel& net, const Dataset& data);

ClassProbabilities classify(const NetworkModel& net, const FeatureVector& fv);

CurveFamily argmax_family(const ClassProbabilities& p);

}  // namespace looptrack
