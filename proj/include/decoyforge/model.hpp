#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decoyforge/decoygen.hpp"
#include "decoyforge/feature_store.hpp"
#include "decoyforge/text.hpp"

namespace decoyforge {

// Which inputs the scorer sees besides the candidate answer.
enum class InputMode { A, QA, IA, IQA };

std::string_view to_string(InputMode mode);
InputMode parse_input_mode(std::string_view name);
bool uses_image(InputMode mode);
bool uses_question(InputMode mode);
std::size_t input_dim(InputMode mode, std::size_t d_img, std::size_t d_txt);

// One-hidden-layer scorer sigmoid(U . relu(W g) + b).
struct MlpParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd U;
  double b = 0.0;

  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(W.rows()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(W.cols()); }
  bool all_finite() const;

  /// Uniform in +-sqrt(6/(fan_in+fan_out)) per layer, b = 0.
  static MlpParams glorot(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);
  static MlpParams zeros(std::size_t input_dim, std::size_t hidden_dim);
};

enum class Modality { image, question, answer };

struct Segment {
  Modality modality;
  std::size_t offset;
  std::size_t size;
};

// Concatenated per-modality features, each segment l2-normalized (or zero).
struct JointFeature {
  Eigen::VectorXd values;
  std::vector<Segment> layout;
};

/// Throws Error("features.missing") when the mode needs an absent image and
/// Error("model.candidate_index") for an out-of-range candidate.
JointFeature build_features(const CandidateSet& item, std::size_t candidate_index, InputMode mode,
                            const FeatureStore* images, const EmbeddingTable& table);

double sigmoid(double x);

/// Throws Error("model.dimension") on a size mismatch.
double score(const MlpParams& params, const Eigen::VectorXd& g);
inline double score(const MlpParams& params, const JointFeature& g) { return score(params, g.values); }

// A candidate set with its segments precomputed, so training and evaluation
// embed every text once.
struct EncodedItem {
  Eigen::VectorXd image;
  Eigen::VectorXd question;
  std::vector<Eigen::VectorXd> answers;
  std::size_t target_index = 0;
  std::vector<Provenance> slots;
  std::vector<std::string> normalized_candidates;
  std::vector<std::string> normalized_human_answers;
};

struct FeatureSources {
  const FeatureStore* images = nullptr;
  const EmbeddingTable* table = nullptr;
};

std::vector<EncodedItem> encode_items(std::span<const CandidateSet> items, InputMode mode,
                                      const FeatureSources& sources);
void joint_feature(const EncodedItem& item, std::size_t candidate, InputMode mode, Eigen::Ref<Eigen::VectorXd> out);

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  std::size_t batch_triplets = 100;
  std::size_t decoys_per_triplet = 3;
  // Iterations between /10 learning-rate drops; 0 keeps the rate fixed.
  std::size_t step_size = 0;
  std::size_t max_iters = 10000;
  std::uint64_t seed = 0;
  double dropout_rate = 0.5;
  std::size_t hidden_dim = 256;
  InputMode mode = InputMode::IQA;
  std::optional<MlpParams> init;

  /// Throws Error("config.invalid") naming the offending field.
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
  std::optional<double> val_accuracy;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t iterations = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

void write_training_log(std::ostream& out, const TrainingLog& log);

struct TrainResult {
  MlpParams params;
  TrainingLog log;
};

// A batch of labelled examples, one column per example.
struct ExampleBatch {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

/// Draws one training batch: per triplet the target (label 1) and
/// `decoys_per_triplet` decoys (label 0) sampled from one decoy source
/// chosen uniformly among those present.
ExampleBatch sample_batch(std::span<const EncodedItem> items, std::span<const std::size_t> triplets,
                          InputMode mode, std::size_t decoys_per_triplet, std::mt19937_64& rng);

/// Minibatch SGD with momentum on the logistic loss. Throws
/// Error("model.diverged") if the loss becomes non-finite.
TrainResult train(std::span<const EncodedItem> items, const TrainConfig& cfg,
                  std::span<const EncodedItem> validation = {});
TrainResult train(std::span<const CandidateSet> items, const TrainConfig& cfg, const FeatureSources& sources,
                  std::span<const CandidateSet> validation = {});

struct Gradients {
  double loss = 0.0;
  Eigen::MatrixXd dW;
  Eigen::VectorXd dU;
  double db = 0.0;
};

/// Mean logistic loss over the batch and its exact gradient, no dropout.
Gradients loss_and_gradients(const MlpParams& params, const ExampleBatch& batch);
double batch_loss(const MlpParams& params, const ExampleBatch& batch);

using GradientFn = std::function<Gradients(const MlpParams&, const ExampleBatch&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences on a seeded sample of up to `samples` parameters.
/// Relative error is |analytic - numeric| / max(|numeric|, 1e-6).
GradCheckResult grad_check(const MlpParams& params, const ExampleBatch& batch, double epsilon,
                           std::size_t samples = 200, std::uint64_t seed = 0,
                           const GradientFn& analytic = loss_and_gradients);

/// Argmax of the candidate scores, lowest index among ties.
std::size_t predict(const MlpParams& params, const EncodedItem& item, InputMode mode);
std::size_t predict(const MlpParams& params, const CandidateSet& item, InputMode mode, const FeatureSources& sources);

/// Index of the first maximum.
std::size_t argmax_first(std::span<const double> scores);

enum class Metric { plain, vqa_clipped };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// min(matches / 3, 1) for the picked answer against the human answers.
double vqa_clipped_score(std::string_view picked, std::span<const std::string> human_answers);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t items = 0;
};

/// Throws Error("model.missing_human_answers") for vqa_clipped on an item
/// without human answers.
EvalResult evaluate(const MlpParams& params, std::span<const EncodedItem> items, InputMode mode, Metric metric);
EvalResult evaluate(const MlpParams& params, std::span<const CandidateSet> items, InputMode mode, Metric metric,
                    const FeatureSources& sources);

// Model checkpoint: magic "DFMP", u32 version, u32 mode, u32 d_img,
// u32 d_txt, u32 hidden_dim, u32 input_dim, then W row-major, U and b as
// little-endian float64.
struct Checkpoint {
  InputMode mode = InputMode::IQA;
  std::size_t d_img = 0;
  std::size_t d_txt = 0;
  MlpParams params;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace decoyforge
