#include "ordemo/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "ordemo/error.hpp"
#include "ordemo/hash.hpp"

namespace ordemo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'O', 'R', 'D', 'E', 'M', 'O', 'C', 'K'};
constexpr std::size_t kDigestLength = 64;

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw ValidationError("checkpoint truncated");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

struct TensorEntry {
  std::string name;
  const Tensor<float>* tensor;
};

void describe(json& list, std::vector<TensorEntry>& entries, const std::string& name,
              const Tensor<float>& t) {
  list.push_back({{"name", name}, {"shape", t.shape()}});
  entries.push_back({name, &t});
}

Tensor<float> read_tensor(std::string_view bytes, std::size_t& pos, const json& entry) {
  const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
  const std::size_t count = Tensor<float>::element_count(shape);
  if (pos + count * sizeof(float) > bytes.size()) throw ValidationError("checkpoint truncated");
  std::vector<float> data(count);
  std::memcpy(data.data(), bytes.data() + pos, count * sizeof(float));
  pos += count * sizeof(float);
  return Tensor<float>(shape, std::move(data));
}

void load_into(ClassifierModel<float>& model, std::string_view bytes, std::size_t& pos,
               const json& tensors, std::size_t& next, const std::string& prefix) {
  auto& params = model.mutable_parameters();
  for (auto& p : params) {
    const json& entry = tensors.at(next++);
    if (entry.at("name").get<std::string>() != prefix + p.name) {
      throw ValidationError("checkpoint tensor order mismatch at " + prefix + p.name);
    }
    Tensor<float> t = read_tensor(bytes, pos, entry);
    if (t.shape() != p.value.shape()) {
      throw ValidationError("checkpoint tensor shape mismatch at " + prefix + p.name);
    }
    p.value = std::move(t);
  }
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"embed_dim", c.embed_dim},
          {"kernel1", c.kernel1},         {"filters1", c.filters1},
          {"kernel2", c.kernel2},         {"filters2", c.filters2},
          {"hidden1", c.hidden1},         {"hidden2", c.hidden2},
          {"max_seq_length", c.max_seq_length}, {"head", std::string(to_string(c.head))},
          {"output_width", c.output_width}};
}

ModelConfig model_config_from_json(const json& doc) {
  ModelConfig c;
  c.vocab_size = doc.at("vocab_size").get<std::size_t>();
  c.embed_dim = doc.at("embed_dim").get<std::size_t>();
  c.kernel1 = doc.at("kernel1").get<std::size_t>();
  c.filters1 = doc.at("filters1").get<std::size_t>();
  c.kernel2 = doc.at("kernel2").get<std::size_t>();
  c.filters2 = doc.at("filters2").get<std::size_t>();
  c.hidden1 = doc.at("hidden1").get<std::size_t>();
  c.hidden2 = doc.at("hidden2").get<std::size_t>();
  c.max_seq_length = doc.at("max_seq_length").get<std::size_t>();
  c.head = parse_head_mode(doc.at("head").get<std::string>());
  c.output_width = doc.at("output_width").get<std::size_t>();
  c.validate();
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  if (ck.model.config().vocab_size != ck.vocabulary.size()) {
    throw ValidationError("checkpoint vocabulary size does not match the model");
  }
  json header;
  header["format"] = "ordemo-checkpoint";
  header["model_config"] = model_config_to_json(ck.model.config());
  header["taxonomy"] = json::parse(serialize_taxonomy(ck.taxonomy));
  header["vocabulary"] = {{"min_freq", ck.vocabulary.min_freq()},
                          {"tokens", ck.vocabulary.tokens()},
                          {"sha256", ck.vocabulary.hash()}};
  header["train_config"] = ck.train_config;

  json tensors = json::array();
  std::vector<TensorEntry> entries;
  for (const auto& p : ck.model.parameters()) describe(tensors, entries, p.name, p.value);
  if (ck.training) {
    const TrainingState& s = *ck.training;
    const AdamWOptions& o = s.optimizer.options;
    header["training"] = {{"completed_epochs", s.completed_epochs},
                          {"history", s.history},
                          {"best_score", s.best_score},
                          {"best_epoch", s.best_epoch},
                          {"optimizer",
                           {{"learning_rate", o.learning_rate},
                            {"beta1", o.beta1},
                            {"beta2", o.beta2},
                            {"epsilon", o.epsilon},
                            {"weight_decay", o.weight_decay},
                            {"step", s.optimizer.step}}}};
    const auto& params = ck.model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      describe(tensors, entries, "adamw.m." + params[i].name, s.optimizer.first_moment.at(i));
      describe(tensors, entries, "adamw.v." + params[i].name, s.optimizer.second_moment.at(i));
    }
    for (const auto& p : s.best_model.parameters()) {
      describe(tensors, entries, "best." + p.name, p.value);
    }
  }
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& e : entries) {
    out.append(reinterpret_cast<const char*>(e.tensor->raw()), e.tensor->size() * sizeof(float));
  }
  out += sha256_hex(out);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 12 + kDigestLength ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError("not an ordemo checkpoint");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - kDigestLength);
  if (sha256_hex(body) != bytes.substr(bytes.size() - kDigestLength)) {
    throw ValidationError("checkpoint checksum mismatch (corrupt file)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = take<std::uint32_t>(body, pos);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_length = take<std::uint64_t>(body, pos);
  if (pos + header_length > body.size()) throw ValidationError("checkpoint truncated");
  json header;
  try {
    header = json::parse(body.substr(pos, header_length));
    pos += header_length;

    EmotionTaxonomy taxonomy = load_taxonomy(header.at("taxonomy").dump());
    const json& vocab = header.at("vocabulary");
    Vocabulary vocabulary = Vocabulary::from_tokens(
        vocab.at("tokens").get<std::vector<std::string>>(), vocab.at("min_freq").get<int>());
    if (vocabulary.hash() != vocab.at("sha256").get<std::string>()) {
      throw ValidationError("checkpoint vocabulary hash mismatch");
    }
    const ModelConfig config = model_config_from_json(header.at("model_config"));
    if (config.vocab_size != vocabulary.size()) {
      throw ValidationError("checkpoint vocabulary size does not match the model");
    }
    const json& tensors = header.at("tensors");
    std::size_t next = 0;
    ClassifierModel<float> model(config);
    load_into(model, body, pos, tensors, next, "");

    Checkpoint ck{std::move(taxonomy), std::move(vocabulary), std::move(model),
                  header.at("train_config"), std::nullopt};
    if (header.contains("training")) {
      const json& t = header.at("training");
      const json& o = t.at("optimizer");
      AdamWOptions options;
      options.learning_rate = o.at("learning_rate").get<double>();
      options.beta1 = o.at("beta1").get<double>();
      options.beta2 = o.at("beta2").get<double>();
      options.epsilon = o.at("epsilon").get<double>();
      options.weight_decay = o.at("weight_decay").get<double>();
      AdamWState<float> optimizer = AdamWState<float>::zeros(ck.model.parameters(), options);
      optimizer.step = o.at("step").get<std::uint64_t>();
      for (std::size_t i = 0; i < ck.model.parameters().size(); ++i) {
        optimizer.first_moment[i] = read_tensor(body, pos, tensors.at(next++));
        optimizer.second_moment[i] = read_tensor(body, pos, tensors.at(next++));
      }
      ClassifierModel<float> best(config);
      load_into(best, body, pos, tensors, next, "best.");
      ck.training = TrainingState{std::move(optimizer), t.at("completed_epochs").get<int>(),
                                  t.at("history"), std::move(best),
                                  t.at("best_score").get<double>(), t.at("best_epoch").get<int>()};
    }
    if (next != tensors.size() || pos != body.size()) {
      throw ValidationError("checkpoint has trailing or missing tensor data");
    }
    return ck;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("checkpoint not found: " + path.string());
  }
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace ordemo
