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

#include "gestures/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace gestures {
namespace {

constexpr const char* kMagic = "gestures-checkpoint v1";

void write_values(std::ostream& os, const double* data, Index n) {
  char buf[64];
  for (Index i = 0; i < n; ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data[i], std::chars_format::hex);
    os << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  }
  os << '\n';
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  os << "tensor " << name << ' ' << t.rank();
  for (Index e : t.shape()) os << ' ' << e;
  os << '\n';
  write_values(os, t.data().data(), t.size());
}

void write_vector(std::ostream& os, const std::string& name, const Eigen::VectorXd& v) {
  write_tensor(os, name, Tensor({v.size()}, v));
}

void write_norm(std::ostream& os, const BatchNormState& bn, const std::string& prefix) {
  write_tensor(os, prefix + ".gamma", bn.gamma.value);
  write_tensor(os, prefix + ".beta", bn.beta.value);
  write_vector(os, prefix + ".running_mean", bn.running_mean);
  write_vector(os, prefix + ".running_var", bn.running_var);
  write_tensor(os, prefix + ".stats_ready", Tensor({1}, bn.stats_ready ? 1.0 : 0.0));
}

void write_conv(std::ostream& os, const Conv1dLayer& l, const std::string& prefix) {
  write_tensor(os, prefix + ".kernel", l.kernel.value);
  if (l.has_bias()) write_tensor(os, prefix + ".bias", l.bias.value);
}

class TensorTable {
 public:
  explicit TensorTable(std::map<std::string, Tensor> t) : tensors_(std::move(t)) {}

  Tensor take(const std::string& name, const Shape& shape) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != shape)
      throw DataError("checkpoint: tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                      ", expected " + shape_string(shape));
    Tensor t = std::move(it->second);
    tensors_.erase(it);
    return t;
  }

  void fill(Parameter& p, const std::string& name) {
    p.value = take(name, p.value.shape());
    p.zero_grad();
  }

  void fill(BatchNormState& bn, const std::string& prefix) {
    fill(bn.gamma, prefix + ".gamma");
    fill(bn.beta, prefix + ".beta");
    bn.running_mean = take(prefix + ".running_mean", {bn.channels()}).data();
    bn.running_var = take(prefix + ".running_var", {bn.channels()}).data();
    bn.stats_ready = take(prefix + ".stats_ready", {1})[0] != 0.0;
  }

  void fill(Conv1dLayer& l, const std::string& prefix) {
    fill(l.kernel, prefix + ".kernel");
    if (l.has_bias()) fill(l.bias, prefix + ".bias");
  }

  void expect_empty() const {
    if (!tensors_.empty()) throw DataError("checkpoint: unexpected tensor '" + tensors_.begin()->first + "'");
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

std::vector<double> read_values(const std::string& line, Index n, const std::string& name) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p < end) {
    while (p < end && *p == ' ') ++p;
    if (p >= end) break;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(p, end, v, std::chars_format::hex);
    if (ec != std::errc()) throw DataError("checkpoint: malformed value in tensor '" + name + "'");
    out.push_back(v);
    p = ptr;
  }
  if (static_cast<Index>(out.size()) != n)
    throw DataError("checkpoint: tensor '" + name + "' has " + std::to_string(out.size()) + " values, expected " +
                    std::to_string(n));
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path);
  if (!os) throw DataError(path.string() + ": cannot write checkpoint");
  os << kMagic << '\n';
  os << "step " << ckpt.step << '\n';
  os << "epoch " << ckpt.epoch << '\n';
  os << "[config]\n" << format_config(ckpt.config) << "[end]\n";
  if (ckpt.alphabet) {
    os << "[alphabet]\nsymbols";
    for (const auto& s : ckpt.alphabet->symbols()) os << ' ' << s;
    os << "\nmerge";
    for (const auto& s : ckpt.alphabet->symbols())
      if (ckpt.alphabet->merged(s) != s) os << ' ' << s << ':' << ckpt.alphabet->merged(s);
    os << "\n[end]\n";
  }
  write_vector(os, "norm.mean", ckpt.norm.mean);
  write_vector(os, "norm.stddev", ckpt.norm.stddev);
  const GestureModel& m = ckpt.model;
  write_conv(os, m.encoder.conv1, "encoder.conv1");
  write_norm(os, m.encoder.bn1, "encoder.bn1");
  write_conv(os, m.encoder.conv2, "encoder.conv2");
  write_norm(os, m.encoder.bn2, "encoder.bn2");
  write_tensor(os, "decoder.W", m.decoder.W.value);
  if (m.decoder.has_bias()) write_tensor(os, "decoder.bias", m.decoder.bias.value);
  if (ckpt.recognizer) {
    const RecognizerParams& r = *ckpt.recognizer;
    for (std::size_t i = 0; i < r.front.size(); ++i) {
      write_conv(os, r.front[i], "recognizer.front" + std::to_string(i));
      write_norm(os, r.front_norms[i], "recognizer.front" + std::to_string(i) + ".bn");
    }
    for (std::size_t i = 0; i < r.context.size(); ++i) {
      write_conv(os, r.context[i], "recognizer.context" + std::to_string(i));
      write_norm(os, r.context_norms[i], "recognizer.context" + std::to_string(i) + ".bn");
    }
    for (std::size_t i = 0; i < r.projection.size(); ++i)
      write_conv(os, r.projection[i], "recognizer.proj" + std::to_string(i));
    write_conv(os, r.output, "recognizer.output");
  }
  os << "end\n";
  if (!os) throw DataError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw DataError(path.string() + ": not a gestures checkpoint (expected '" + kMagic + "')");

  Checkpoint ckpt;
  std::string config_text;
  std::vector<std::string> symbols;
  std::string merge;
  bool has_alphabet = false;
  std::map<std::string, Tensor> tensors;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "step") {
      ls >> ckpt.step;
    } else if (head == "epoch") {
      ls >> ckpt.epoch;
    } else if (head == "[config]") {
      while (std::getline(in, line) && line != "[end]") config_text += line + "\n";
    } else if (head == "[alphabet]") {
      has_alphabet = true;
      while (std::getline(in, line) && line != "[end]") {
        std::istringstream as(line);
        std::string kind, item;
        as >> kind;
        while (as >> item) {
          if (kind == "symbols") symbols.push_back(item);
          else merge += (merge.empty() ? "" : ",") + item;
        }
      }
    } else if (head == "tensor") {
      std::string name;
      Index rank = 0;
      ls >> name >> rank;
      Shape shape(static_cast<std::size_t>(rank));
      for (auto& e : shape) ls >> e;
      if (!ls || rank < 1) throw DataError(path.string() + ": bad tensor header '" + line + "'");
      std::string values;
      if (!std::getline(in, values)) throw DataError(path.string() + ": truncated tensor '" + name + "'");
      const Index n = shape_size(shape);
      const auto v = read_values(values, n, name);
      tensors.emplace(name, Tensor(shape, Eigen::Map<const Eigen::VectorXd>(v.data(), n)));
    } else if (!head.empty()) {
      throw DataError(path.string() + ": unexpected line '" + line + "'");
    }
  }
  if (!ended) throw DataError(path.string() + ": truncated checkpoint");

  apply_key_values(ckpt.config, parse_key_values(config_text));
  ckpt.config.validate();
  TensorTable table(std::move(tensors));
  ckpt.norm.mean = table.take("norm.mean", {ckpt.config.model.channels}).data();
  ckpt.norm.stddev = table.take("norm.stddev", {ckpt.config.model.channels}).data();

  ckpt.model = make_gesture_model(ckpt.config.model, 0);
  GestureModel& m = ckpt.model;
  table.fill(m.encoder.conv1, "encoder.conv1");
  table.fill(m.encoder.bn1, "encoder.bn1");
  table.fill(m.encoder.conv2, "encoder.conv2");
  table.fill(m.encoder.bn2, "encoder.bn2");
  table.fill(m.decoder.W, "decoder.W");
  if (m.decoder.has_bias()) table.fill(m.decoder.bias, "decoder.bias");

  if (has_alphabet) {
    std::string joined;
    for (std::size_t i = 0; i < symbols.size(); ++i) joined += (i ? "," : "") + symbols[i];
    TrainConfig tmp;
    tmp.alphabet = joined;
    tmp.merge = merge;
    ckpt.alphabet = make_alphabet(tmp);
  }
  if (ckpt.config.task == Task::kJoint) {
    if (!ckpt.alphabet) throw DataError(path.string() + ": joint checkpoint without alphabet");
    RecognizerShape shape = ckpt.config.recognizer;
    shape.input_features = ckpt.config.model.gestures;
    shape.classes = ckpt.alphabet->classes();
    RecognizerParams r = make_recognizer(shape, 0);
    for (std::size_t i = 0; i < r.front.size(); ++i) {
      table.fill(r.front[i], "recognizer.front" + std::to_string(i));
      table.fill(r.front_norms[i], "recognizer.front" + std::to_string(i) + ".bn");
    }
    for (std::size_t i = 0; i < r.context.size(); ++i) {
      table.fill(r.context[i], "recognizer.context" + std::to_string(i));
      table.fill(r.context_norms[i], "recognizer.context" + std::to_string(i) + ".bn");
    }
    for (std::size_t i = 0; i < r.projection.size(); ++i)
      table.fill(r.projection[i], "recognizer.proj" + std::to_string(i));
    table.fill(r.output, "recognizer.output");
    ckpt.recognizer = std::move(r);
  }
  table.expect_empty();
  return ckpt;
}

}  // namespace gestures
