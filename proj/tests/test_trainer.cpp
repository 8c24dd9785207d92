#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ordemo/checkpoint.hpp"
#include "ordemo/error.hpp"
#include "ordemo/eval.hpp"
#include "ordemo/predict.hpp"
#include "ordemo/random.hpp"
#include "ordemo/trainer.hpp"

using namespace ordemo;

namespace {

const std::string kDataDir = ORDEMO_DATA_DIR;

TrainConfig small_config(HeadMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 3;
  c.batch_size = 8;
  c.max_seq_length = 12;
  c.embed_dim = 8;
  c.filters1 = 8;
  c.filters2 = 8;
  c.hidden1 = 8;
  c.hidden2 = 8;
  c.seed = 13;
  return c;
}

CorpusSplit synthetic_split(const std::string& taxonomy_file, std::size_t n, double p_signal = 0.6) {
  SyntheticSpec spec;
  spec.taxonomy = load_taxonomy_file(kDataDir + "/taxonomies/" + taxonomy_file);
  spec.examples_per_class = n;
  spec.p_signal = p_signal;
  spec.sequence_length = 10;
  spec.seed = 8;
  return split_corpus(generate_synthetic(spec), {}, 8);
}

EmotionTaxonomy tax(const std::string& file) { return load_taxonomy_file(kDataDir + "/taxonomies/" + file); }

}  // namespace

TEST_CASE("presets") {
  const auto paper = preset_config("paper");
  CHECK(paper.epochs == 10);
  CHECK(paper.learning_rate == 0.6e-5);
  CHECK(paper.batch_size == 16);
  CHECK(paper.max_seq_length == 200);
  CHECK(paper.kernel1 == 6);
  CHECK(paper.kernel2 == 4);
  CHECK(paper.embed_dim == 768);
  CHECK(paper.filters1 == 1024);
  CHECK(paper.filters2 == 2048);
  CHECK(paper.hidden1 == 2048);
  CHECK(paper.hidden2 == 768);
  const auto desk = preset_config("desk");
  CHECK(desk.embed_dim == 32);
  CHECK(desk.kernel1 == 6);
  CHECK(desk.batch_size == 16);
  CHECK_THROWS_AS(preset_config("laptop"), ValidationError);
}

TEST_CASE("config documents") {
  auto c = small_config(HeadMode::Ordinal2D);
  c.head_weights = {2.0, 0.5};
  c.data.taxonomy = "/abs/tax.json";
  c.data.holdout_labels = {"joy"};
  const auto doc = train_config_to_json(c);
  const auto back = train_config_from_json(doc, TrainConfig{});
  CHECK(train_config_to_json(back) == doc);

  const auto rel = train_config_from_json({{"data", {{"corpus", "c.tsv"}}}}, TrainConfig{}, "/base");
  CHECK(rel.data.corpus == "/base/c.tsv");

  CHECK_THROWS_AS(train_config_from_json({{"epochz", 3}}, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json({{"model", {{"kernel_sizes", {6}}}}}, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json({{"mode", "ordinal-3d"}}, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json({{"max_seq_length", 5}}, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json({{"epochs", -1}}, TrainConfig{}), ValidationError);
}

TEST_CASE("incompatible head and taxonomy fail before training") {
  const auto split = synthetic_split("isear.json", 10);
  CHECK_THROWS_AS(Trainer(small_config(HeadMode::Ordinal2D), tax("isear.json"), split.train, split.val),
                  ValidationError);
  const auto grid = synthetic_split("isear_grid.json", 10);
  CHECK_THROWS_AS(Trainer(small_config(HeadMode::Ordinal1D), tax("isear_grid.json"), grid.train, grid.val),
                  ValidationError);
}

TEST_CASE("zero epochs leaves the seeded initial model") {
  const auto split = synthetic_split("isear.json", 10);
  auto c = small_config(HeadMode::Softmax);
  c.epochs = 0;
  Trainer t(c, tax("isear.json"), split.train, split.val);
  CHECK(t.finished());
  t.run();
  CHECK(t.history().epochs.empty());
  const auto expected = ClassifierModel<float>::initialized(t.model().config(), mix_seed(c.seed, 7));
  CHECK(t.final_checkpoint().model.parameters() == expected.parameters());
  CHECK(t.best_checkpoint().model.parameters() == expected.parameters());
  CHECK_THROWS_AS(t.run_epoch(), ValidationError);
}

TEST_CASE("vocabulary comes from the training split only") {
  auto split = synthetic_split("isear.json", 10);
  split.val.records.push_back({"onlyinval rank0", "sadness"});
  Trainer t(small_config(HeadMode::Softmax), tax("isear.json"), split.train, split.val);
  const auto vocab = t.final_checkpoint().vocabulary;
  CHECK(vocab.id("onlyinval") == Vocabulary::kUnknown);
  CHECK(vocab == build_vocab(split.train, 1));
}

TEST_CASE("resuming from a state checkpoint matches an uninterrupted run") {
  for (const auto mode : {HeadMode::Softmax, HeadMode::Ordinal1D, HeadMode::Ordinal2D}) {
    const std::string file = mode == HeadMode::Ordinal2D ? "isear_grid.json" : "isear.json";
    const auto split = synthetic_split(file, 20);
    const auto c = small_config(mode);

    Trainer full(c, tax(file), split.train, split.val);
    full.run();

    Trainer first(c, tax(file), split.train, split.val);
    first.run_epoch();
    first.run_epoch();
    const auto state = deserialize_checkpoint(serialize_checkpoint(first.state_checkpoint()));
    Trainer second = Trainer::resume(state, split.train, split.val);
    CHECK(second.completed_epochs() == 2);
    second.run();

    CHECK(serialize_checkpoint(second.final_checkpoint()) == serialize_checkpoint(full.final_checkpoint()));
    CHECK(serialize_checkpoint(second.best_checkpoint()) == serialize_checkpoint(full.best_checkpoint()));
    CHECK(serialize_checkpoint(second.state_checkpoint()) == serialize_checkpoint(full.state_checkpoint()));
    REQUIRE(second.history().epochs.size() == 3);
    CHECK(second.history().epochs[2].train_loss == full.history().epochs[2].train_loss);
  }
}

TEST_CASE("best checkpoint tracks the best validation epoch") {
  const auto split = synthetic_split("isear.json", 20, 0.3);
  auto c = small_config(HeadMode::Softmax);
  c.epochs = 5;
  Trainer t(c, tax("isear.json"), split.train, split.val);
  t.run();
  const auto& epochs = t.history().epochs;
  int best = 1;
  for (const auto& e : epochs) {
    if (*e.val_macro_f1 > *epochs[best - 1].val_macro_f1) best = e.epoch;
  }
  CHECK(t.best_epoch() == best);
  const Predictor p = Predictor::from_checkpoint(t.best_checkpoint());
  CHECK(evaluate(p, split.val).macro_f1 == *epochs[best - 1].val_macro_f1);
}

TEST_CASE("without validation data the best model is the latest") {
  const auto split = synthetic_split("isear.json", 10);
  Trainer t(small_config(HeadMode::Ordinal1D), tax("isear.json"), split.train, {});
  t.run();
  CHECK(t.best_checkpoint().model.parameters() == t.final_checkpoint().model.parameters());
  CHECK_FALSE(t.history().epochs.back().val_accuracy.has_value());
}

TEST_CASE("divergence is reported with epoch and batch") {
  const auto split = synthetic_split("isear.json", 10);
  auto c = small_config(HeadMode::Ordinal1D);
  c.learning_rate = 1e30;
  Trainer t(c, tax("isear.json"), split.train, split.val);
  try {
    t.run();
    FAIL("expected a runtime failure");
  } catch (const RuntimeFailure& e) {
    const std::string what = e.what();
    CHECK(what.find("non-finite") != std::string::npos);
    CHECK(what.find("epoch 1, batch") != std::string::npos);
  }
}

TEST_CASE("training reduces loss on separable data") {
  const auto split = synthetic_split("isear.json", 30, 1.0);
  auto c = small_config(HeadMode::Ordinal1D);
  c.epochs = 40;
  Trainer t(c, tax("isear.json"), split.train, split.val);
  t.run();
  CHECK(t.history().epochs.back().train_loss < t.history().epochs.front().train_loss);
  const Predictor p = Predictor::from_checkpoint(t.final_checkpoint());
  CHECK(evaluate(p, split.train).accuracy >= 0.99);
}
