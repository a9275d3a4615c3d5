// Copyright 2026 The nullfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nullfuse/config.h"

#include <fstream>
#include <sstream>

namespace nullfuse {

std::string ToString(Backbone b) {
  return b == Backbone::kSasRec ? "sasrec" : "dreamrec";
}

Backbone ParseBackbone(const std::string& s) {
  if (s == "sasrec") return Backbone::kSasRec;
  if (s == "dreamrec") return Backbone::kDreamRec;
  throw ValidationError("unknown backbone '" + s + "'");
}

namespace {

using nlohmann::json;

std::string ScaleName(ThresholdScale s) {
  return s == ThresholdScale::kSquared ? "squared" : "singular";
}

ThresholdScale ParseScale(const std::string& s) {
  if (s == "squared") return ThresholdScale::kSquared;
  if (s == "singular") return ThresholdScale::kSingular;
  throw ValidationError("unknown threshold scale '" + s + "'");
}

template <typename T>
json Optional(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> ReadOptional(const json& obj, const char* key,
                              std::optional<T> fallback) {
  if (!obj.contains(key)) return fallback;
  if (obj.at(key).is_null()) return std::nullopt;
  return obj.at(key).get<T>();
}

// Every key of `doc` must appear in `schema` at the same path. Null schema
// entries (unset optionals) accept any value; their owners validate them.
void RejectUnknownKeys(const json& doc, const json& schema,
                       const std::string& path) {
  if (!doc.is_object()) {
    throw ValidationError("config: '" + (path.empty() ? "<root>" : path) +
                          "' must be an object");
  }
  for (const auto& [key, value] : doc.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) {
      throw ValidationError("config: unknown key '" + here + "'");
    }
    const json& sub = schema.at(key);
    if (sub.is_object() && !value.is_null()) RejectUnknownKeys(value, sub, here);
  }
}

}  // namespace

json RunConfig::ToJson() const {
  json j;
  j["name"] = name;
  j["output_dir"] = output_dir;
  j["backbone"] = ToString(backbone);
  j["data"] = {{"embeddings", data.embeddings},
               {"interactions", data.interactions},
               {"catalog", data.catalog},
               {"synth", data.synth ? data.synth->ToJson() : json(nullptr)}};
  j["strategy"] = {{"kind", ToString(strategy.kind)},
                   {"dim", strategy.dim},
                   {"adapter_hidden", strategy.adapter_hidden},
                   {"reg_coef", strategy.reg_coef},
                   {"seed", strategy.seed},
                   {"standardize", strategy.standardize},
                   {"fusion",
                    {{"init", ToString(strategy.fusion.init)},
                     {"seed", strategy.fusion.seed},
                     {"freeze_language", strategy.fusion.freeze_language},
                     {"train_ids", strategy.fusion.train_ids}}}};
  j["split"] = {{"mode", ToString(split.mode)},
                {"ratios", split.ratios},
                {"history_window", split.history_window}};
  j["spectral"] = {{"threshold", Optional(spectral.threshold)},
                   {"scale", ScaleName(spectral.scale)},
                   {"semantic_dim", Optional(spectral.semantic_dim)},
                   {"null_dim", Optional(spectral.null_dim)},
                   {"clip", spectral.clip}};
  // model.dim is not configurable: it always follows the item encoder.
  j["model"] = {{"layers", model.layers},
                {"heads", model.heads},
                {"max_history", model.max_history},
                {"ff_multiplier", model.ff_multiplier}};
  j["train"] = {{"lr", train.lr},
                {"id_lr", train.id_lr},
                {"batch_size", train.batch_size},
                {"patience", train.patience},
                {"warmup", train.warmup},
                {"max_epochs", train.max_epochs},
                {"negatives", train.negatives},
                {"seed", train.seed},
                {"loss", ToString(train.loss)}};
  j["diffusion"] = {{"steps", diffusion.steps},
                    {"beta_start", diffusion.beta_start},
                    {"beta_end", diffusion.beta_end},
                    {"sample_steps", diffusion.sample_steps},
                    {"hidden", diffusion.hidden},
                    {"sampler", ToString(diffusion.sampler)},
                    {"prediction", ToString(diffusion.prediction)}};
  j["eval"] = {{"ks", eval.ks},
               {"mask_history", eval.mask_history},
               {"head_quantile", eval.head_quantile}};
  return j;
}

RunConfig RunConfig::FromJson(const json& j) {
  RunConfig c;
  RejectUnknownKeys(j, c.ToJson(), "");
  try {
    c.name = j.value("name", c.name);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.backbone = ParseBackbone(j.value("backbone", ToString(c.backbone)));

    const json data = j.value("data", json::object());
    c.data.embeddings = data.value("embeddings", c.data.embeddings);
    c.data.interactions = data.value("interactions", c.data.interactions);
    c.data.catalog = data.value("catalog", c.data.catalog);
    if (data.contains("synth") && !data.at("synth").is_null()) {
      c.data.synth = SynthConfig::FromJson(data.at("synth"));
    }

    const json st = j.value("strategy", json::object());
    c.strategy.kind =
        ParseStrategyKind(st.value("kind", ToString(c.strategy.kind)));
    c.strategy.dim = st.value("dim", c.strategy.dim);
    c.strategy.adapter_hidden = st.value("adapter_hidden", c.strategy.adapter_hidden);
    c.strategy.reg_coef = st.value("reg_coef", c.strategy.reg_coef);
    c.strategy.seed = st.value("seed", c.strategy.seed);
    c.strategy.standardize = st.value("standardize", c.strategy.standardize);
    const json fu = st.value("fusion", json::object());
    c.strategy.fusion.init =
        ParseIdInit(fu.value("init", ToString(c.strategy.fusion.init)));
    c.strategy.fusion.seed = fu.value("seed", c.strategy.fusion.seed);
    c.strategy.fusion.freeze_language =
        fu.value("freeze_language", c.strategy.fusion.freeze_language);
    c.strategy.fusion.train_ids = fu.value("train_ids", c.strategy.fusion.train_ids);

    const json sp = j.value("split", json::object());
    c.split.mode = ParseSplitMode(sp.value("mode", ToString(c.split.mode)));
    c.split.ratios = sp.value("ratios", c.split.ratios);
    c.split.history_window = sp.value("history_window", c.split.history_window);

    const json spec = j.value("spectral", json::object());
    c.spectral.threshold =
        ReadOptional<double>(spec, "threshold", c.spectral.threshold);
    c.spectral.scale = ParseScale(spec.value("scale", ScaleName(c.spectral.scale)));
    c.spectral.semantic_dim =
        ReadOptional<std::size_t>(spec, "semantic_dim", c.spectral.semantic_dim);
    c.spectral.null_dim =
        ReadOptional<std::size_t>(spec, "null_dim", c.spectral.null_dim);
    c.spectral.clip = spec.value("clip", c.spectral.clip);

    const json m = j.value("model", json::object());
    c.model.layers = m.value("layers", c.model.layers);
    c.model.heads = m.value("heads", c.model.heads);
    c.model.max_history = m.value("max_history", c.model.max_history);
    c.model.ff_multiplier = m.value("ff_multiplier", c.model.ff_multiplier);

    const json tr = j.value("train", json::object());
    c.train.lr = tr.value("lr", c.train.lr);
    c.train.id_lr = tr.value("id_lr", c.train.id_lr);
    c.train.batch_size = tr.value("batch_size", c.train.batch_size);
    c.train.patience = tr.value("patience", c.train.patience);
    c.train.warmup = tr.value("warmup", c.train.warmup);
    c.train.max_epochs = tr.value("max_epochs", c.train.max_epochs);
    c.train.negatives = tr.value("negatives", c.train.negatives);
    c.train.seed = tr.value("seed", c.train.seed);
    c.train.loss = ParseLossKind(tr.value("loss", ToString(c.train.loss)));

    const json df = j.value("diffusion", json::object());
    c.diffusion.steps = df.value("steps", c.diffusion.steps);
    c.diffusion.beta_start = df.value("beta_start", c.diffusion.beta_start);
    c.diffusion.beta_end = df.value("beta_end", c.diffusion.beta_end);
    c.diffusion.sample_steps = df.value("sample_steps", c.diffusion.sample_steps);
    c.diffusion.hidden = df.value("hidden", c.diffusion.hidden);
    c.diffusion.sampler =
        ParseSampler(df.value("sampler", ToString(c.diffusion.sampler)));
    c.diffusion.prediction =
        ParsePrediction(df.value("prediction", ToString(c.diffusion.prediction)));

    const json ev = j.value("eval", json::object());
    c.eval.ks = ev.value("ks", c.eval.ks);
    c.eval.mask_history = ev.value("mask_history", c.eval.mask_history);
    c.eval.head_quantile = ev.value("head_quantile", c.eval.head_quantile);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value: ") + e.what());
  }
  c.train.mask_history = c.eval.mask_history;
  c.strategy.Validate();
  c.split.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

void RunConfig::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config " + path.string());
  out << ToJson().dump(2) << "\n";
}

std::uint64_t RunConfig::Hash() const {
  const std::string s = ToJson().dump();
  return Fnv1a64(s.data(), s.size());
}

void ApplyOverride(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) {
      throw ValidationError("override '" + path + "': '" + parts[i] +
                            "' is not an object");
    }
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

}  // namespace nullfuse
