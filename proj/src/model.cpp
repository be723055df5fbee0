#include "decoyforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "decoyforge/util.hpp"
#include "json.hpp"

namespace decoyforge {

std::string_view to_string(InputMode mode) {
  switch (mode) {
    case InputMode::A: return "A";
    case InputMode::QA: return "QA";
    case InputMode::IA: return "IA";
    case InputMode::IQA: return "IQA";
  }
  return "IQA";
}

InputMode parse_input_mode(std::string_view name) {
  if (name == "A" || name == "a") return InputMode::A;
  if (name == "QA" || name == "qa") return InputMode::QA;
  if (name == "IA" || name == "ia") return InputMode::IA;
  if (name == "IQA" || name == "iqa") return InputMode::IQA;
  throw Error("config.invalid", "unknown model mode '" + std::string(name) + "'", "mode");
}

bool uses_image(InputMode mode) { return mode == InputMode::IA || mode == InputMode::IQA; }
bool uses_question(InputMode mode) { return mode == InputMode::QA || mode == InputMode::IQA; }

std::size_t input_dim(InputMode mode, std::size_t d_img, std::size_t d_txt) {
  return (uses_image(mode) ? d_img : 0) + (uses_question(mode) ? d_txt : 0) + d_txt;
}

bool MlpParams::all_finite() const { return W.allFinite() && U.allFinite() && std::isfinite(b); }

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::VectorXd normalized_segment(std::span<const double> v) {
  Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  const double n = out.norm();
  if (n > 0.0) out /= n;
  return out;
}

Eigen::VectorXd normalized_segment(std::span<const float> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  const double n = out.norm();
  if (n > 0.0) out /= n;
  return out;
}

Eigen::VectorXd text_segment(std::string_view text, const EmbeddingTable& table) {
  return normalized_segment(std::span<const double>(embed_avg(normalize(text), table).values));
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

MlpParams MlpParams::glorot(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x5eedULL));
  MlpParams p;
  p.W.resize(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim));
  p.U.resize(static_cast<Eigen::Index>(hidden_dim));
  const double lw = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
  const double lu = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
  for (Eigen::Index r = 0; r < p.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.W.cols(); ++c) p.W(r, c) = (2.0 * unit_uniform(rng) - 1.0) * lw;
  }
  for (Eigen::Index r = 0; r < p.U.size(); ++r) p.U[r] = (2.0 * unit_uniform(rng) - 1.0) * lu;
  p.b = 0.0;
  return p;
}

MlpParams MlpParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  MlpParams p;
  p.W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(input_dim));
  p.U = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim));
  return p;
}

JointFeature build_features(const CandidateSet& item, std::size_t candidate_index, InputMode mode,
                            const FeatureStore* images, const EmbeddingTable& table) {
  if (candidate_index >= item.candidates.size()) {
    throw Error("model.candidate_index", "candidate index " + std::to_string(candidate_index) +
                                             " out of range for '" + item.triplet_id + "'");
  }
  std::vector<std::pair<Modality, Eigen::VectorXd>> parts;
  if (uses_image(mode)) {
    if (!images) throw Error("features.missing", "mode " + std::string(to_string(mode)) + " needs image features");
    parts.emplace_back(Modality::image, normalized_segment(images->lookup(item.image_id)));
  }
  if (uses_question(mode)) parts.emplace_back(Modality::question, text_segment(item.question, table));
  parts.emplace_back(Modality::answer, text_segment(item.candidates[candidate_index], table));

  JointFeature g;
  std::size_t total = 0;
  for (const auto& [m, v] : parts) total += static_cast<std::size_t>(v.size());
  g.values.resize(static_cast<Eigen::Index>(total));
  std::size_t offset = 0;
  for (const auto& [m, v] : parts) {
    g.values.segment(static_cast<Eigen::Index>(offset), v.size()) = v;
    g.layout.push_back({m, offset, static_cast<std::size_t>(v.size())});
    offset += static_cast<std::size_t>(v.size());
  }
  return g;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double score(const MlpParams& params, const Eigen::VectorXd& g) {
  if (static_cast<std::size_t>(g.size()) != params.input_dim()) {
    throw Error("model.dimension", "feature dimension " + std::to_string(g.size()) + " does not match model input " +
                                       std::to_string(params.input_dim()));
  }
  const Eigen::VectorXd hidden = (params.W * g).cwiseMax(0.0);
  return sigmoid(params.U.dot(hidden) + params.b);
}

std::vector<EncodedItem> encode_items(std::span<const CandidateSet> items, InputMode mode,
                                      const FeatureSources& sources) {
  if (!sources.table) throw Error("embeddings.missing", "an embedding table is required", "embeddings");
  if (uses_image(mode) && !sources.images) {
    throw Error("features.missing", "mode " + std::string(to_string(mode)) + " needs image features", "features");
  }
  std::vector<EncodedItem> out(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = items[i];
    auto& e = out[i];
    if (uses_image(mode)) e.image = normalized_segment(sources.images->lookup(item.image_id));
    if (uses_question(mode)) e.question = text_segment(item.question, *sources.table);
    for (const auto& c : item.candidates) {
      e.answers.push_back(text_segment(c, *sources.table));
      e.normalized_candidates.push_back(normalize_answer(c));
    }
    for (const auto& h : item.human_answers) e.normalized_human_answers.push_back(normalize_answer(h));
    e.target_index = item.target_index;
    e.slots = item.slots.size() == item.candidates.size() ? item.slots : item.provenance;
  });
  return out;
}

void joint_feature(const EncodedItem& item, std::size_t candidate, InputMode mode, Eigen::Ref<Eigen::VectorXd> out) {
  Eigen::Index offset = 0;
  if (uses_image(mode)) {
    out.segment(offset, item.image.size()) = item.image;
    offset += item.image.size();
  }
  if (uses_question(mode)) {
    out.segment(offset, item.question.size()) = item.question;
    offset += item.question.size();
  }
  const auto& a = item.answers[candidate];
  out.segment(offset, a.size()) = a;
}

namespace {

std::size_t encoded_dim(const EncodedItem& item, InputMode mode) {
  std::size_t d = static_cast<std::size_t>(item.answers.front().size());
  if (uses_image(mode)) d += static_cast<std::size_t>(item.image.size());
  if (uses_question(mode)) d += static_cast<std::size_t>(item.question.size());
  return d;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw Error("config.invalid", "learning rate must be positive", "lr");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("config.invalid", "momentum must lie in [0, 1)", "momentum");
  if (batch_triplets < 1) throw Error("config.invalid", "batch size must be at least 1", "batch");
  if (decoys_per_triplet < 1) throw Error("config.invalid", "decoys per triplet must be at least 1", "decoys");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error("config.invalid", "dropout rate must lie in [0, 1)", "dropout");
  }
  if (hidden_dim < 1 && !init) throw Error("config.invalid", "hidden_dim must be at least 1", "hidden");
}

ExampleBatch sample_batch(std::span<const EncodedItem> items, std::span<const std::size_t> triplets,
                          InputMode mode, std::size_t decoys_per_triplet, std::mt19937_64& rng) {
  const std::size_t per = decoys_per_triplet + 1;
  const std::size_t dim = encoded_dim(items[triplets.front()], mode);
  ExampleBatch batch;
  batch.X.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(triplets.size() * per));
  batch.y.resize(static_cast<Eigen::Index>(triplets.size() * per));

  Eigen::Index col = 0;
  std::vector<std::size_t> chosen;
  for (std::size_t t : triplets) {
    const auto& item = items[t];
    // Decoy positions grouped by the source slot they fill.
    std::vector<Provenance> sources;
    for (std::size_t i = 0; i < item.answers.size(); ++i) {
      if (i == item.target_index) continue;
      if (std::find(sources.begin(), sources.end(), item.slots[i]) == sources.end()) {
        sources.push_back(item.slots[i]);
      }
    }
    std::sort(sources.begin(), sources.end());
    const Provenance source = sources[uniform_index(rng, sources.size())];
    std::vector<std::size_t> same, other;
    for (std::size_t i = 0; i < item.answers.size(); ++i) {
      if (i == item.target_index) continue;
      (item.slots[i] == source ? same : other).push_back(i);
    }
    chosen.clear();
    while (chosen.size() < decoys_per_triplet && !same.empty()) {
      const std::size_t j = uniform_index(rng, same.size());
      chosen.push_back(same[j]);
      same.erase(same.begin() + static_cast<std::ptrdiff_t>(j));
    }
    while (chosen.size() < decoys_per_triplet && !other.empty()) {
      const std::size_t j = uniform_index(rng, other.size());
      chosen.push_back(other[j]);
      other.erase(other.begin() + static_cast<std::ptrdiff_t>(j));
    }

    joint_feature(item, item.target_index, mode, batch.X.col(col));
    batch.y[col++] = 1.0;
    for (std::size_t c : chosen) {
      joint_feature(item, c, mode, batch.X.col(col));
      batch.y[col++] = 0.0;
    }
  }
  return batch;
}

Gradients loss_and_gradients(const MlpParams& params, const ExampleBatch& batch) {
  const Eigen::MatrixXd pre = params.W * batch.X;
  const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  const Eigen::VectorXd logits = (hidden.transpose() * params.U).array() + params.b;
  const double inv_n = 1.0 / static_cast<double>(batch.y.size());

  Gradients g;
  Eigen::VectorXd dlogit(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    g.loss += softplus(logits[i]) - batch.y[i] * logits[i];
    dlogit[i] = (sigmoid(logits[i]) - batch.y[i]) * inv_n;
  }
  g.loss *= inv_n;
  g.dU = hidden * dlogit;
  g.db = dlogit.sum();
  const Eigen::MatrixXd dpre = ((params.U * dlogit.transpose()).array() * (pre.array() > 0.0).cast<double>()).matrix();
  g.dW = dpre * batch.X.transpose();
  return g;
}

double batch_loss(const MlpParams& params, const ExampleBatch& batch) {
  const Eigen::MatrixXd hidden = (params.W * batch.X).cwiseMax(0.0);
  const Eigen::VectorXd logits = (hidden.transpose() * params.U).array() + params.b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) loss += softplus(logits[i]) - batch.y[i] * logits[i];
  return loss / static_cast<double>(batch.y.size());
}

namespace {

// Forward/backward with inverted dropout on the hidden layer.
Gradients dropout_gradients(const MlpParams& params, const ExampleBatch& batch, double rate, std::mt19937_64& rng) {
  if (rate == 0.0) return loss_and_gradients(params, batch);
  const Eigen::MatrixXd pre = params.W * batch.X;
  Eigen::MatrixXd mask(pre.rows(), pre.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = unit_uniform(rng) < rate ? 0.0 : keep_scale;
  }
  const Eigen::MatrixXd active = (pre.array() > 0.0).cast<double>().matrix();
  const Eigen::MatrixXd hidden = (pre.cwiseMax(0.0).array() * mask.array()).matrix();
  const Eigen::VectorXd logits = (hidden.transpose() * params.U).array() + params.b;
  const double inv_n = 1.0 / static_cast<double>(batch.y.size());

  Gradients g;
  Eigen::VectorXd dlogit(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    g.loss += softplus(logits[i]) - batch.y[i] * logits[i];
    dlogit[i] = (sigmoid(logits[i]) - batch.y[i]) * inv_n;
  }
  g.loss *= inv_n;
  g.dU = hidden * dlogit;
  g.db = dlogit.sum();
  const Eigen::MatrixXd dpre = ((params.U * dlogit.transpose()).array() * mask.array() * active.array()).matrix();
  g.dW = dpre * batch.X.transpose();
  return g;
}

}  // namespace

TrainResult train(std::span<const EncodedItem> items, const TrainConfig& cfg, std::span<const EncodedItem> validation) {
  cfg.validate();
  if (items.empty()) throw Error("model.no_data", "no training items");
  for (const auto& item : items) {
    if (item.answers.size() < cfg.decoys_per_triplet + 1) {
      throw Error("model.too_few_decoys", "training item has " + std::to_string(item.answers.size() - 1) +
                                              " decoys, need " + std::to_string(cfg.decoys_per_triplet));
    }
  }
  const std::size_t dim = encoded_dim(items.front(), cfg.mode);

  TrainResult result;
  if (cfg.init) {
    if (cfg.init->input_dim() != dim) {
      throw Error("model.dimension", "warm-start model expects input " + std::to_string(cfg.init->input_dim()) +
                                         ", data gives " + std::to_string(dim),
                  "init");
    }
    result.params = *cfg.init;
  } else {
    result.params = MlpParams::glorot(dim, cfg.hidden_dim, cfg.seed);
  }
  auto& p = result.params;
  Eigen::MatrixXd vW = Eigen::MatrixXd::Zero(p.W.rows(), p.W.cols());
  Eigen::VectorXd vU = Eigen::VectorXd::Zero(p.U.size());
  double vb = 0.0;

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x7a11ULL));
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  stable_shuffle(order, rng);
  const std::size_t batch_size = std::min(cfg.batch_triplets, items.size());

  std::size_t pos = 0, epoch = 0, epoch_batches = 0;
  double epoch_loss = 0.0, lr = cfg.lr0;
  auto close_epoch = [&](std::size_t iteration) {
    EpochLog e;
    e.epoch = epoch;
    e.iteration = iteration;
    e.learning_rate = lr;
    e.mean_loss = epoch_loss / static_cast<double>(epoch_batches);
    if (!validation.empty()) e.val_accuracy = evaluate(p, validation, cfg.mode, Metric::plain).accuracy;
    result.log.epochs.push_back(e);
    ++epoch;
    epoch_batches = 0;
    epoch_loss = 0.0;
  };

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    if (pos + batch_size > order.size()) {
      close_epoch(iter);
      stable_shuffle(order, rng);
      pos = 0;
    }
    const std::span<const std::size_t> triplets(order.data() + pos, batch_size);
    pos += batch_size;

    const ExampleBatch batch = sample_batch(items, triplets, cfg.mode, cfg.decoys_per_triplet, rng);
    const Gradients g = dropout_gradients(p, batch, cfg.dropout_rate, rng);
    if (!std::isfinite(g.loss) || !g.dW.allFinite() || !g.dU.allFinite()) {
      throw Error("model.diverged", "loss became non-finite at iteration " + std::to_string(iter) +
                                        " (learning rate " + std::to_string(lr) + ")");
    }
    result.log.positives += batch_size;
    result.log.negatives += batch_size * cfg.decoys_per_triplet;

    lr = cfg.step_size ? cfg.lr0 * std::pow(0.1, static_cast<double>(iter / cfg.step_size)) : cfg.lr0;
    vW = cfg.momentum * vW - lr * g.dW;
    vU = cfg.momentum * vU - lr * g.dU;
    vb = cfg.momentum * vb - lr * g.db;
    p.W += vW;
    p.U += vU;
    p.b += vb;
    if (!p.all_finite()) {
      throw Error("model.diverged", "parameters became non-finite at iteration " + std::to_string(iter));
    }
    epoch_loss += g.loss;
    ++epoch_batches;
    ++result.log.iterations;
  }
  if (epoch_batches > 0) close_epoch(cfg.max_iters);
  return result;
}

TrainResult train(std::span<const CandidateSet> items, const TrainConfig& cfg, const FeatureSources& sources,
                  std::span<const CandidateSet> validation) {
  const auto encoded = encode_items(items, cfg.mode, sources);
  const auto encoded_val = encode_items(validation, cfg.mode, sources);
  return train(encoded, cfg, encoded_val);
}

void write_training_log(std::ostream& out, const TrainingLog& log) {
  for (const auto& e : log.epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"iteration", e.iteration},
                        {"learning_rate", e.learning_rate},
                        {"mean_loss", e.mean_loss}};
    if (e.val_accuracy) j["val_accuracy"] = *e.val_accuracy;
    out << j.dump() << '\n';
  }
}

GradCheckResult grad_check(const MlpParams& params, const ExampleBatch& batch, double epsilon, std::size_t samples,
                           std::uint64_t seed, const GradientFn& analytic) {
  const Gradients g = analytic(params, batch);
  const std::size_t n_w = static_cast<std::size_t>(params.W.size());
  const std::size_t n_u = static_cast<std::size_t>(params.U.size());
  const std::size_t total = n_w + n_u + 1;

  std::vector<std::size_t> picks(total);
  std::iota(picks.begin(), picks.end(), 0);
  std::mt19937_64 rng(splitmix64(seed));
  stable_shuffle(picks, rng);
  if (picks.size() > samples) picks.resize(samples);
  // Always include b.
  if (std::find(picks.begin(), picks.end(), total - 1) == picks.end()) picks.push_back(total - 1);

  GradCheckResult out;
  MlpParams probe = params;
  for (std::size_t k : picks) {
    double* slot;
    double a;
    if (k < n_w) {
      slot = probe.W.data() + k;
      a = g.dW.data()[k];
    } else if (k < n_w + n_u) {
      slot = probe.U.data() + (k - n_w);
      a = g.dU.data()[k - n_w];
    } else {
      slot = &probe.b;
      a = g.db;
    }
    const double saved = *slot;
    *slot = saved + epsilon;
    const double up = batch_loss(probe, batch);
    *slot = saved - epsilon;
    const double down = batch_loss(probe, batch);
    *slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(a - numeric) / std::max(std::abs(numeric), 1e-6);
    out.max_relative_error = std::max(out.max_relative_error, err);
    ++out.checked;
  }
  return out;
}

std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t predict(const MlpParams& params, const EncodedItem& item, InputMode mode) {
  const std::size_t n = item.answers.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(encoded_dim(item, mode)), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) joint_feature(item, c, mode, X.col(static_cast<Eigen::Index>(c)));
  if (static_cast<std::size_t>(X.rows()) != params.input_dim()) {
    throw Error("model.dimension", "feature dimension " + std::to_string(X.rows()) + " does not match model input " +
                                       std::to_string(params.input_dim()));
  }
  const Eigen::MatrixXd hidden = (params.W * X).cwiseMax(0.0);
  const Eigen::VectorXd logits = (hidden.transpose() * params.U).array() + params.b;
  std::vector<double> scores(n);
  for (std::size_t c = 0; c < n; ++c) scores[c] = sigmoid(logits[static_cast<Eigen::Index>(c)]);
  return argmax_first(scores);
}

std::size_t predict(const MlpParams& params, const CandidateSet& item, InputMode mode, const FeatureSources& sources) {
  const auto encoded = encode_items(std::span<const CandidateSet>(&item, 1), mode, sources);
  return predict(params, encoded.front(), mode);
}

std::string_view to_string(Metric metric) { return metric == Metric::plain ? "plain" : "vqa-clipped"; }

Metric parse_metric(std::string_view name) {
  if (name == "plain") return Metric::plain;
  if (name == "vqa-clipped" || name == "vqa") return Metric::vqa_clipped;
  throw Error("config.invalid", "unknown metric '" + std::string(name) + "'", "metric");
}

double vqa_clipped_score(std::string_view picked, std::span<const std::string> human_answers) {
  const std::string p = normalize_answer(picked);
  const auto matches = std::count_if(human_answers.begin(), human_answers.end(),
                                     [&](const std::string& h) { return normalize_answer(h) == p; });
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

EvalResult evaluate(const MlpParams& params, std::span<const EncodedItem> items, InputMode mode, Metric metric) {
  EvalResult out;
  double total = 0.0;
  for (const auto& item : items) {
    const std::size_t picked = predict(params, item, mode);
    if (metric == Metric::plain) {
      total += picked == item.target_index ? 1.0 : 0.0;
    } else {
      if (item.normalized_human_answers.empty()) {
        throw Error("model.missing_human_answers", "vqa-clipped metric needs human answers for every item");
      }
      const auto& p = item.normalized_candidates[picked];
      const auto matches = std::count(item.normalized_human_answers.begin(), item.normalized_human_answers.end(), p);
      total += std::min(static_cast<double>(matches) / 3.0, 1.0);
    }
    ++out.items;
  }
  out.accuracy = out.items ? total / static_cast<double>(out.items) : 0.0;
  return out;
}

EvalResult evaluate(const MlpParams& params, std::span<const CandidateSet> items, InputMode mode, Metric metric,
                    const FeatureSources& sources) {
  if (metric == Metric::vqa_clipped) {
    for (const auto& item : items) {
      if (item.human_answers.empty()) {
        throw Error("model.missing_human_answers", "item '" + item.triplet_id + "' has no human answers",
                    item.triplet_id);
      }
    }
  }
  return evaluate(params, encode_items(items, mode, sources), mode, metric);
}

}  // namespace decoyforge
