// Copyright 2026 The ema-gestures Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gestures/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace gestures {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

Index to_index(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return static_cast<Index>(out);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<Index> to_index_list(const std::string& key, const std::string& v) {
  std::vector<Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_index(key, trim(item)));
  return out;
}

std::string from_index_list(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define GESTURES_INDEX(member) \
  Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_index(k, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.member); }}
#define GESTURES_DOUBLE(member) \
  Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const TrainConfig& c) { return fmt(c.member); }}
#define GESTURES_BOOL(member) \
  Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define GESTURES_STRING(member) \
  Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.member = v; }, \
        [](const TrainConfig& c) { return c.member; }}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"train.task", Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.task = parse_task(v); },
                           [](const TrainConfig& c) { return to_string(c.task); }}},
      {"model.channels", GESTURES_INDEX(model.channels)},
      {"model.gestures", GESTURES_INDEX(model.gestures)},
      {"model.kernel", GESTURES_INDEX(model.kernel)},
      {"model.encoder_hidden", GESTURES_INDEX(model.encoder_hidden)},
      {"model.encoder_kernel1", GESTURES_INDEX(model.encoder_kernel1)},
      {"model.encoder_kernel2", GESTURES_INDEX(model.encoder_kernel2)},
      {"model.decoder_bias", GESTURES_BOOL(model.decoder_bias)},
      {"model.renormalize_gestures", GESTURES_BOOL(renormalize_gestures)},
      {"loss.lambda1", GESTURES_DOUBLE(loss.lambda1)},
      {"loss.lambda2", GESTURES_DOUBLE(loss.lambda2)},
      {"loss.lambda3", GESTURES_DOUBLE(loss.lambda3)},
      {"loss.lambda4", GESTURES_DOUBLE(loss.lambda4)},
      {"loss.reconstruction",
       Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
               if (v == "mse") c.loss.reconstruction = RecLoss::kMse;
               else if (v == "sse") c.loss.reconstruction = RecLoss::kSse;
               else if (v == "norm") c.loss.reconstruction = RecLoss::kNorm;
               else throw ConfigError("config: " + k + " must be mse, sse or norm, got '" + v + "'");
             },
             [](const TrainConfig& c) {
               switch (c.loss.reconstruction) {
                 case RecLoss::kSse: return std::string("sse");
                 case RecLoss::kNorm: return std::string("norm");
                 default: return std::string("mse");
               }
             }}},
      {"optim.lr", GESTURES_DOUBLE(lr)},
      {"optim.lr_decay_every", GESTURES_INDEX(lr_decay_every)},
      {"optim.lr_decay_factor", GESTURES_DOUBLE(lr_decay_factor)},
      {"optim.weight_decay", GESTURES_DOUBLE(weight_decay)},
      {"optim.decoupled_weight_decay", GESTURES_BOOL(decoupled_weight_decay)},
      {"train.batch_size", GESTURES_INDEX(batch_size)},
      {"train.segment_len", GESTURES_INDEX(segment_len)},
      {"train.epochs", GESTURES_INDEX(epochs)},
      {"train.max_steps", GESTURES_INDEX(max_steps)},
      {"train.seed", Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                             c.seed = static_cast<std::uint64_t>(to_index(k, v));
                           },
                           [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      {"train.train_ratio", GESTURES_DOUBLE(train_ratio)},
      {"train.validation_fraction", GESTURES_DOUBLE(validation_fraction)},
      {"kmeans.window", GESTURES_INDEX(kmeans_window)},
      {"kmeans.stride", GESTURES_INDEX(kmeans_stride)},
      {"kmeans.max_iterations", GESTURES_INDEX(kmeans_max_iterations)},
      {"kmeans.tolerance", GESTURES_DOUBLE(kmeans_tolerance)},
      {"recognizer.front_layers", GESTURES_INDEX(recognizer.front_layers)},
      {"recognizer.front_kernel", GESTURES_INDEX(recognizer.front_kernel)},
      {"recognizer.front_channels", GESTURES_INDEX(recognizer.front_channels)},
      {"recognizer.dilations",
       Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
               c.recognizer.dilations = to_index_list(k, v);
             },
             [](const TrainConfig& c) { return from_index_list(c.recognizer.dilations); }}},
      {"recognizer.context_kernel", GESTURES_INDEX(recognizer.context_kernel)},
      {"recognizer.context_channels", GESTURES_INDEX(recognizer.context_channels)},
      {"recognizer.projection_layers", GESTURES_INDEX(recognizer.projection_layers)},
      {"recognizer.projection_width", GESTURES_INDEX(recognizer.projection_width)},
      {"labels.alphabet", GESTURES_STRING(alphabet)},
      {"labels.merge", GESTURES_STRING(merge)},
      {"eval.beam_width", GESTURES_INDEX(beam_width)},
  };
  return table;
}

#undef GESTURES_INDEX
#undef GESTURES_DOUBLE
#undef GESTURES_BOOL
#undef GESTURES_STRING

}  // namespace

std::string to_string(Task task) { return task == Task::kJoint ? "joint" : "resynthesis"; }

Task parse_task(const std::string& s) {
  if (s == "resynthesis") return Task::kResynthesis;
  if (s == "joint") return Task::kJoint;
  throw ConfigError("config: unknown task '" + s + "' (resynthesis | joint)");
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  positive(model.channels > 0 && model.gestures > 0 && model.kernel > 0, "model extents must be positive");
  positive(model.encoder_hidden > 0 && model.encoder_kernel1 > 0 && model.encoder_kernel2 > 0,
           "encoder extents must be positive");
  positive(loss.lambda1 >= 0 && loss.lambda2 >= 0 && loss.lambda3 >= 0 && loss.lambda4 >= 0,
           "loss weights must be non-negative");
  positive(lr > 0 && lr_decay_every > 0 && lr_decay_factor > 0, "learning-rate schedule must be positive");
  positive(weight_decay >= 0, "weight decay must be non-negative");
  positive(batch_size > 0 && segment_len >= 0 && epochs > 0 && max_steps >= 0, "training counts must be positive");
  positive(train_ratio > 0 && train_ratio < 1, "train_ratio must lie in (0,1)");
  positive(validation_fraction > 0 && validation_fraction < 1, "validation_fraction must lie in (0,1)");
  positive(kmeans_window == model.kernel, "kmeans.window must equal model.kernel");
  positive(kmeans_stride > 0 && kmeans_max_iterations > 0 && kmeans_tolerance >= 0, "kmeans settings");
  positive(beam_width > 0, "eval.beam_width must be positive");
  if (task == Task::kJoint) {
    positive(recognizer.front_layers >= 0 && recognizer.front_kernel > 0 && recognizer.front_channels > 0,
             "recognizer front end");
    positive(recognizer.context_kernel > 0 && recognizer.context_channels > 0, "recognizer context stack");
    for (Index d : recognizer.dilations) positive(d > 0, "recognizer dilations must be positive");
    positive(recognizer.projection_layers >= 0 && recognizer.projection_width > 0, "recognizer projection");
  }
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void apply_key_values(TrainConfig& config, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(config, key, value);
  }
  config.kmeans_window = config.model.kernel;
  if (kv.count("kmeans.window")) config.kmeans_window = to_index("kmeans.window", kv.at("kmeans.window"));
}

KeyValues to_key_values(const TrainConfig& config) {
  KeyValues kv;
  for (const auto& [key, field] : fields()) kv[key] = field.get(config);
  return kv;
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [key, value] : to_key_values(config)) out += key + " = " + value + "\n";
  return out;
}

TrainConfig load_config(const std::filesystem::path& path) {
  TrainConfig c;
  apply_key_values(c, read_key_values(path));
  c.validate();
  return c;
}

LabelAlphabet make_alphabet(const TrainConfig& config) {
  if (config.alphabet == "cmu39") return LabelAlphabet::cmu39();
  std::vector<std::string> symbols;
  std::stringstream ss(config.alphabet);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) symbols.push_back(item);
  }
  if (symbols.empty()) throw ConfigError("config: labels.alphabet is empty");
  std::map<std::string, std::string> merge;
  std::stringstream ms(config.merge);
  while (std::getline(ms, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("config: labels.merge entries are from:to");
    merge[trim(item.substr(0, colon))] = trim(item.substr(colon + 1));
  }
  try {
    return LabelAlphabet(std::move(symbols), std::move(merge));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace gestures
