#include "ordemo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ordemo/error.hpp"
#include "ordemo/random.hpp"

namespace ordemo {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  if (!(head_weights[0] >= 0.0 && head_weights[1] >= 0.0) ||
      head_weights[0] + head_weights[1] <= 0.0) {
    throw ValidationError("head_weights must be non-negative and not both zero");
  }
  optimizer().validate();
  // Widths and sequence length are checked by the model configuration.
  model_config(3, mode == HeadMode::Ordinal2D ? 2 : 1).validate();
}

AdamWOptions TrainConfig::optimizer() const {
  return {learning_rate, beta1, beta2, epsilon, weight_decay};
}

ModelConfig TrainConfig::model_config(std::size_t vocab_size, std::size_t output_width) const {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = embed_dim;
  c.kernel1 = kernel1;
  c.filters1 = filters1;
  c.kernel2 = kernel2;
  c.filters2 = filters2;
  c.hidden1 = hidden1;
  c.hidden2 = hidden2;
  c.max_seq_length = max_seq_length;
  c.head = mode;
  c.output_width = output_width;
  return c;
}

TrainConfig preset_config(std::string_view name) {
  TrainConfig c;
  c.preset = std::string(name);
  if (name == "desk") return c;
  if (name == "paper") {
    c.learning_rate = 0.6e-5;
    c.max_seq_length = 200;
    c.embed_dim = 768;
    c.filters1 = 1024;
    c.filters2 = 2048;
    c.hidden1 = 2048;
    c.hidden2 = 768;
    return c;
  }
  throw ValidationError("unknown preset: " + std::string(name) + " (expected desk or paper)");
}

namespace {

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
  if (!doc.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) throw ValidationError("unknown " + where + " field: " + key);
  }
}

template <typename T>
void assign(const json& doc, const char* key, T& field) {
  if (doc.contains(key)) field = doc.at(key).get<T>();
}

std::string resolve(const std::string& path, const std::filesystem::path& base_dir) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (base_dir / p).lexically_normal().string();
}

json data_to_json(const DataConfig& d) {
  return {{"taxonomy", d.taxonomy},
          {"format", d.format},
          {"corpus", d.corpus},
          {"train", d.train},
          {"val", d.val},
          {"test", d.test},
          {"synthetic", d.synthetic},
          {"split", {d.split.train, d.split.val, d.split.test}},
          {"holdout_labels", d.holdout_labels}};
}

void data_from_json(const json& doc, DataConfig& d, const std::filesystem::path& base_dir) {
  reject_unknown(doc, {"taxonomy", "format", "corpus", "train", "val", "test", "synthetic",
                       "split", "holdout_labels"},
                 "data");
  assign(doc, "taxonomy", d.taxonomy);
  assign(doc, "format", d.format);
  assign(doc, "corpus", d.corpus);
  assign(doc, "train", d.train);
  assign(doc, "val", d.val);
  assign(doc, "test", d.test);
  assign(doc, "holdout_labels", d.holdout_labels);
  for (auto* p : {&d.taxonomy, &d.corpus, &d.train, &d.val, &d.test}) *p = resolve(*p, base_dir);
  if (doc.contains("split")) {
    const auto r = doc.at("split").get<std::vector<double>>();
    if (r.size() != 3) throw ValidationError("data.split needs three ratios");
    d.split = {r[0], r[1], r[2]};
  }
  if (doc.contains("synthetic")) {
    const json& s = doc.at("synthetic");
    if (s.is_null()) {
      d.synthetic = nullptr;
    } else if (s.is_string()) {
      d.synthetic = synthetic_spec_to_json(load_synthetic_spec(resolve(s.get<std::string>(), base_dir)));
    } else {
      d.synthetic = synthetic_spec_to_json(parse_synthetic_spec(s, base_dir));
    }
  }
}

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return {{"preset", c.preset},
          {"mode", std::string(to_string(c.mode))},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_seq_length", c.max_seq_length},
          {"seed", c.seed},
          {"min_freq", c.min_freq},
          {"head_weights", c.head_weights},
          {"model",
           {{"embed_dim", c.embed_dim},
            {"kernel_sizes", {c.kernel1, c.kernel2}},
            {"filters", {c.filters1, c.filters2}},
            {"hidden", {c.hidden1, c.hidden2}}}},
          {"optimizer",
           {{"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"weight_decay", c.weight_decay}}},
          {"data", data_to_json(c.data)}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c,
                                   const std::filesystem::path& base_dir) {
  try {
    reject_unknown(doc, {"preset", "mode", "epochs", "learning_rate", "batch_size",
                         "max_seq_length", "seed", "min_freq", "head_weights", "model",
                         "optimizer", "data"},
                   "config");
    assign(doc, "preset", c.preset);
    if (doc.contains("mode")) c.mode = parse_head_mode(doc.at("mode").get<std::string>());
    assign(doc, "epochs", c.epochs);
    assign(doc, "learning_rate", c.learning_rate);
    assign(doc, "batch_size", c.batch_size);
    assign(doc, "max_seq_length", c.max_seq_length);
    assign(doc, "seed", c.seed);
    assign(doc, "min_freq", c.min_freq);
    assign(doc, "head_weights", c.head_weights);
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      reject_unknown(m, {"embed_dim", "kernel_sizes", "filters", "hidden"}, "model");
      assign(m, "embed_dim", c.embed_dim);
      const auto pair = [&](const char* key, std::size_t& a, std::size_t& b) {
        if (!m.contains(key)) return;
        const auto v = m.at(key).get<std::vector<std::size_t>>();
        if (v.size() != 2) throw ValidationError(std::string("model.") + key + " needs two values");
        a = v[0];
        b = v[1];
      };
      pair("kernel_sizes", c.kernel1, c.kernel2);
      pair("filters", c.filters1, c.filters2);
      pair("hidden", c.hidden1, c.hidden2);
    }
    if (doc.contains("optimizer")) {
      const json& o = doc.at("optimizer");
      reject_unknown(o, {"beta1", "beta2", "epsilon", "weight_decay"}, "optimizer");
      assign(o, "beta1", c.beta1);
      assign(o, "beta2", c.beta2);
      assign(o, "epsilon", c.epsilon);
      assign(o, "weight_decay", c.weight_decay);
    }
    if (doc.contains("data")) data_from_json(doc.at("data"), c.data, base_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json EpochRecord::to_json() const {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"epoch", epoch},
          {"train_loss", train_loss},
          {"val_accuracy", opt(val_accuracy)},
          {"val_macro_f1", opt(val_macro_f1)},
          {"val_mean_error_distance", opt(val_mean_error_distance)},
          {"val_mean_distance_all", opt(val_mean_distance_all)},
          {"seconds", seconds}};
}

EpochRecord EpochRecord::from_json(const json& doc) {
  const auto opt = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
  };
  EpochRecord r;
  r.epoch = doc.at("epoch").get<int>();
  r.train_loss = doc.at("train_loss").get<double>();
  r.val_accuracy = opt("val_accuracy");
  r.val_macro_f1 = opt("val_macro_f1");
  r.val_mean_error_distance = opt("val_mean_error_distance");
  r.val_mean_distance_all = opt("val_mean_distance_all");
  r.seconds = doc.value("seconds", 0.0);
  return r;
}

namespace {

Vocabulary checked_vocabulary(const TrainConfig& config, const EmotionTaxonomy& taxonomy,
                              const LabeledCorpus& train) {
  config.validate();
  require_compatible(config.mode, taxonomy);
  if (train.empty()) throw ValidationError("training split is empty");
  return build_vocab(train, config.min_freq);
}

}  // namespace

Trainer::Trainer(TrainConfig config, EmotionTaxonomy taxonomy, const LabeledCorpus& train,
                 const LabeledCorpus& val)
    : Trainer(config, taxonomy, checked_vocabulary(config, taxonomy, train), std::nullopt, train,
              val) {}

Trainer::Trainer(TrainConfig config, EmotionTaxonomy taxonomy, Vocabulary vocabulary,
                 std::optional<ClassifierModel<float>> model, const LabeledCorpus& train,
                 const LabeledCorpus& val)
    : config_(std::move(config)),
      taxonomy_(std::move(taxonomy)),
      vocabulary_(std::move(vocabulary)),
      model_(model ? std::move(*model)
                   : ClassifierModel<float>::initialized(
                         config_.model_config(vocabulary_.size(),
                                              output_width(config_.mode, taxonomy_)),
                         mix_seed(config_.seed, 7))),
      optimizer_(AdamWState<float>::zeros(model_.parameters(), config_.optimizer())),
      best_model_(model_),
      val_(val) {
  config_.validate();
  require_compatible(config_.mode, taxonomy_);
  if (train.empty()) throw ValidationError("training split is empty");
  if (model_.config().output_width != output_width(config_.mode, taxonomy_)) {
    throw ValidationError("model output width does not match the taxonomy");
  }
  for (const auto& r : val_.records) taxonomy_.index_of(r.label);
  encode_training_set(train);
}

Trainer Trainer::resume(const Checkpoint& state, const LabeledCorpus& train,
                        const LabeledCorpus& val) {
  if (!state.training) throw ValidationError("checkpoint carries no training state");
  const TrainingState& s = *state.training;
  TrainConfig config = train_config_from_json(state.train_config, TrainConfig{});
  Trainer t(config, state.taxonomy, state.vocabulary, std::optional<ClassifierModel<float>>(state.model), train, val);
  t.optimizer_ = s.optimizer;
  t.best_model_ = s.best_model;
  t.best_score_ = s.best_score;
  t.best_epoch_ = s.best_epoch;
  t.completed_ = s.completed_epochs;
  for (const auto& e : s.history) t.history_.epochs.push_back(EpochRecord::from_json(e));
  return t;
}

void Trainer::encode_training_set(const LabeledCorpus& train) {
  const std::size_t length = config_.max_seq_length;
  const std::size_t width = model_.config().output_width;
  train_rows_ = train.size();
  train_ids_.clear();
  train_ids_.reserve(train_rows_ * length);
  train_targets_ = Tensor<float>({train_rows_, width});
  for (std::size_t i = 0; i < train_rows_; ++i) {
    const Record& r = train.records[i];
    const auto ids = tokenize(r.text, vocabulary_, length);
    if (ids.front() == Vocabulary::kPadding) {
      throw ValidationError("training record " + std::to_string(i + 1) +
                            " is empty after tokenization");
    }
    train_ids_.insert(train_ids_.end(), ids.begin(), ids.end());
    const auto target = target_for(taxonomy_, r.label, config_.mode).flatten();
    for (std::size_t j = 0; j < width; ++j) train_targets_(i, j) = static_cast<float>(target[j]);
  }
}

double Trainer::selection_score(const MetricsReport& report) const {
  return config_.mode == HeadMode::Softmax ? report.macro_f1 : -report.mean_distance_all;
}

const EpochRecord& Trainer::run_epoch() {
  if (finished()) throw ValidationError("training already finished");
  const auto started = std::chrono::steady_clock::now();
  const int epoch = completed_ + 1;
  const std::size_t length = config_.max_seq_length;
  const std::size_t width = model_.config().output_width;

  std::vector<std::size_t> order(train_rows_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(config_.seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);

  double loss_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < train_rows_; start += config_.batch_size, ++batch_index) {
    const std::size_t rows = std::min(config_.batch_size, train_rows_ - start);
    TokenBatch batch{rows, length, {}};
    batch.ids.reserve(rows * length);
    Tensor<float> targets({rows, width});
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = order[start + r];
      batch.ids.insert(batch.ids.end(), train_ids_.begin() + static_cast<std::ptrdiff_t>(i * length),
                       train_ids_.begin() + static_cast<std::ptrdiff_t>((i + 1) * length));
      std::copy_n(&train_targets_(i, 0), width, &targets(r, 0));
    }
    const auto where = [&] {
      return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
    };
    try {
      const auto fwd = forward(model_, batch);
      const auto loss = compute_loss(fwd.outputs, targets, config_.mode, config_.head_weights);
      if (!std::isfinite(loss.value)) {
        std::ostringstream msg;
        msg << "non-finite loss at " << where() << ": " << loss.value;
        throw RuntimeFailure(msg.str());
      }
      const auto grads = backward(model_, fwd.cache, loss.grad);
      adamw_step(model_.mutable_parameters(), grads, optimizer_);
      loss_sum += loss.value * static_cast<double>(rows);
    } catch (const RuntimeFailure& e) {
      const std::string what = e.what();
      if (what.starts_with("non-finite loss at")) throw;
      throw RuntimeFailure("non-finite loss at " + where() + ": " + what);
    }
  }

  EpochRecord record;
  record.epoch = epoch;
  record.train_loss = loss_sum / static_cast<double>(train_rows_);
  if (!val_.empty()) {
    const Predictor predictor(model_, vocabulary_, taxonomy_);
    const MetricsReport report = evaluate(predictor, val_);
    record.val_accuracy = report.accuracy;
    record.val_macro_f1 = report.macro_f1;
    record.val_mean_error_distance = report.mean_error_distance;
    record.val_mean_distance_all = report.mean_distance_all;
    const double score = selection_score(report);
    if (best_epoch_ == 0 || score > best_score_) {
      best_score_ = score;
      best_epoch_ = epoch;
      best_model_ = model_;
    }
  } else {
    best_epoch_ = epoch;
    best_model_ = model_;
  }
  record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  completed_ = epoch;
  history_.epochs.push_back(record);
  return history_.epochs.back();
}

void Trainer::run(const std::function<void(const Trainer&)>& after_epoch) {
  while (!finished()) {
    run_epoch();
    if (after_epoch) after_epoch(*this);
  }
}

Checkpoint Trainer::final_checkpoint() const {
  return Checkpoint{taxonomy_, vocabulary_, model_, train_config_to_json(config_), std::nullopt};
}

Checkpoint Trainer::best_checkpoint() const {
  return Checkpoint{taxonomy_, vocabulary_, best_model_, train_config_to_json(config_),
                    std::nullopt};
}

Checkpoint Trainer::state_checkpoint() const {
  Checkpoint ck = final_checkpoint();
  json history = json::array();
  for (const auto& e : history_.epochs) {
    json record = e.to_json();
    record.erase("seconds");  // wall-clock time would break bit-identical reruns
    history.push_back(std::move(record));
  }
  ck.training = TrainingState{optimizer_, completed_, std::move(history), best_model_,
                              best_score_, best_epoch_};
  return ck;
}

TrainResult train(const TrainConfig& config, const EmotionTaxonomy& taxonomy,
                  const LabeledCorpus& train_split, const LabeledCorpus& val) {
  Trainer trainer(config, taxonomy, train_split, val);
  trainer.run();
  return {trainer.final_checkpoint(), trainer.best_checkpoint(), trainer.history()};
}

}  // namespace ordemo
