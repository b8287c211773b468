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

#include "gestures/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace gestures {
namespace fs = std::filesystem;

namespace {

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

}  // namespace

Utterance read_ema(const fs::path& path, std::string id) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw DataError(where(path, 1) + "missing header");
  const auto head = split_ws(line);
  Index channels = -1;
  double rate = -1.0;
  if (head.size() != 4 || head[0] != "ema" || head[1] != "v1")
    throw DataError(where(path, 1) + "expected header 'ema v1 channels=<n> rate=<hz>'");
  for (std::size_t i = 2; i < 4; ++i) {
    double v = 0.0;
    if (head[i].starts_with("channels=") && parse_double(head[i].substr(9), v)) {
      channels = static_cast<Index>(v);
    } else if (head[i].starts_with("rate=") && parse_double(head[i].substr(5), v)) {
      rate = v;
    } else {
      throw DataError(where(path, 1) + "bad header field '" + std::string(head[i]) + "'");
    }
  }
  if (channels < 1 || !(rate > 0.0)) throw DataError(where(path, 1) + "invalid channels or rate");

  std::vector<double> values;
  std::size_t lineno = 1;
  Index frames = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (static_cast<Index>(fields.size()) != channels)
      throw DataError(where(path, lineno) + "channel count " + std::to_string(fields.size()) +
                      " differs from declared " + std::to_string(channels));
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) throw DataError(where(path, lineno) + "malformed value '" + std::string(f) + "'");
      if (!std::isfinite(v)) throw DataError(where(path, lineno) + "non-finite value");
      values.push_back(v);
    }
    ++frames;
  }
  if (frames == 0) throw DataError(path.string() + ": no frames");

  Utterance u;
  u.id = id.empty() ? path.stem().string() : std::move(id);
  u.sample_rate = rate;
  u.frames = Tensor({channels, frames});
  // file is frame-major, tensor is channel-major
  for (Index t = 0; t < frames; ++t)
    for (Index c = 0; c < channels; ++c)
      u.frames(c, t) = values[static_cast<std::size_t>(t * channels + c)];
  return u;
}

void write_ema(const fs::path& path, const Utterance& utt) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << "ema v1 channels=" << utt.channels() << " rate=" << format_double(utt.sample_rate) << '\n';
  for (Index t = 0; t < utt.length(); ++t) {
    for (Index c = 0; c < utt.channels(); ++c) out << (c ? " " : "") << format_double(utt.frames(c, t));
    out << '\n';
  }
}

std::vector<std::pair<std::string, PhonemeSequence>> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::pair<std::string, PhonemeSequence>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    PhonemeSequence seq;
    for (std::size_t i = 1; i < fields.size(); ++i) seq.emplace_back(fields[i]);
    out.emplace_back(std::string(fields[0]), std::move(seq));
  }
  return out;
}

void write_labels(const fs::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write");
  for (const Utterance& u : corpus) {
    if (!u.labels) continue;
    out << u.id;
    for (const auto& s : *u.labels) out << ' ' << s;
    out << '\n';
  }
}

Corpus load_corpus(const fs::path& manifest, const std::optional<fs::path>& labels) {
  std::ifstream in(manifest);
  if (!in) throw DataError(manifest.string() + ": cannot open manifest");
  std::string line;
  std::size_t lineno = 0;
  Corpus corpus;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1 && line == "id,path") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw DataError(where(manifest, lineno) + "expected 'id,path'");
    const std::string id = trim(line.substr(0, comma));
    fs::path file = trim(line.substr(comma + 1));
    if (file.is_relative()) file = manifest.parent_path() / file;
    corpus.push_back(read_ema(file, id));
  }
  if (labels) {
    std::map<std::string, PhonemeSequence> by_id;
    for (auto& [id, seq] : read_labels(*labels)) by_id[id] = std::move(seq);
    for (Utterance& u : corpus) {
      auto it = by_id.find(u.id);
      if (it == by_id.end()) throw DataError(labels->string() + ": no labels for utterance '" + u.id + "'");
      u.labels = it->second;
    }
  }
  return corpus;
}

void save_corpus(const fs::path& dir, const Corpus& corpus) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError((dir / "manifest.csv").string() + ": cannot write");
  manifest << "id,path\n";
  bool any_labels = false;
  for (const Utterance& u : corpus) {
    write_ema(dir / (u.id + ".ema"), u);
    manifest << u.id << ',' << u.id << ".ema\n";
    any_labels = any_labels || u.labels.has_value();
  }
  if (any_labels) write_labels(dir / "labels.txt", corpus);
}

NormStats compute_norm_stats(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("compute_norm_stats: empty corpus");
  const Index C = corpus.front().channels();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(C);
  double n = 0.0;
  for (const Utterance& u : corpus) {
    if (u.channels() != C) throw DataError("compute_norm_stats: channel count differs in " + u.id);
    sum += u.frames.matrix().rowwise().sum();
    n += static_cast<double>(u.length());
  }
  NormStats s;
  s.mean = sum / n;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(C);
  for (const Utterance& u : corpus)
    sq += (u.frames.matrix().colwise() - s.mean).array().square().matrix().rowwise().sum();
  s.stddev = (sq / n).cwiseSqrt();
  for (Index c = 0; c < C; ++c)
    if (!(s.stddev[c] > 0.0)) throw DataError("compute_norm_stats: channel " + std::to_string(c) + " has zero variance");
  return s;
}

Tensor normalize(const Tensor& frames, const NormStats& stats) {
  if (frames.rank() != 2 || frames.dim(0) != stats.mean.size())
    throw ShapeError("normalize: channel count does not match statistics");
  Tensor out = frames;
  out.matrix() = (frames.matrix().colwise() - stats.mean).array().colwise() / stats.stddev.array();
  return out;
}

Tensor denormalize(const Tensor& frames, const NormStats& stats) {
  if (frames.rank() != 2 || frames.dim(0) != stats.mean.size())
    throw ShapeError("denormalize: channel count does not match statistics");
  Tensor out = frames;
  out.matrix() = (frames.matrix().array().colwise() * stats.stddev.array()).matrix().colwise() + stats.mean;
  return out;
}

Corpus normalize(const Corpus& corpus, const NormStats& stats) {
  Corpus out = corpus;
  for (Utterance& u : out) u.frames = normalize(u.frames, stats);
  return out;
}

Split split_corpus(const Corpus& corpus, double train_ratio, std::uint64_t seed) {
  if (corpus.size() < 5) throw DataError("split_corpus: need at least 5 utterances");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("split_corpus: ratio in (0,1)");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(corpus.size()) * train_ratio + 1e-9));
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? s.train : s.test).push_back(corpus[order[i]]);
  return s;
}

}  // namespace gestures
